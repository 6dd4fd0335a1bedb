#!/usr/bin/env node
/**
 * Command line for the bucket embedder.
 *
 * Exit codes: 0 success, 1 usage error, 2 input/format error, 3 model load
 * failure (matching the consumer pipeline's convention).
 */
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { BucketFormatError } from './buckets.js';
import { embedBuckets } from './embed.js';
import {
    ClinicalBertEncoder,
    DEFAULT_MAX_TOKENS,
    DEFAULT_MODEL_ID,
    HashEncoder,
    ModelLoadError,
    type Encoder,
} from './encoders.js';
import { StoreFormatError } from './ehre.js';

/* Thrown from the yargs fail handler so a validation failure stops the
 * command handler from running at all. */
class UsageError extends Error {}

interface EmbedArgs {
    buckets: string;
    out: string;
    encoder: 'clinicalbert' | 'hash';
    model: string;
    maxTokens: number;
    batchSize: number;
    chunkMean: boolean;
    dim: number;
    seed: number;
}

async function buildEncoder(args: EmbedArgs): Promise<Encoder> {
    if (args.encoder === 'hash') {
        return new HashEncoder(args.dim, args.seed);
    }
    return ClinicalBertEncoder.load({
        modelId: args.model,
        maxTokens: args.maxTokens,
        chunkMean: args.chunkMean,
    });
}

async function runEmbed(args: EmbedArgs): Promise<void> {
    const encoder = await buildEncoder(args);
    const result = await embedBuckets({
        buckets: args.buckets,
        out: args.out,
        encoder,
        batchSize: args.batchSize,
    });
    if (result.emptyTexts.length > 0) {
        console.warn(`embed: warning: ${result.emptyTexts.length} empty bucket texts: ${result.emptyTexts.join(', ')}`);
    }
    console.log(`embed: ${result.count} vectors of width ${result.dim} -> ${args.out}`);
}

export async function main(argv: string[]): Promise<number> {
    const parser = yargs(argv)
        .scriptName('clinicalbert-embedder')
        .command<EmbedArgs>(
            'embed',
            'embed exported bucket texts and write an EHRE v1 store',
            (cmd) =>
                cmd
                    .option('buckets', { type: 'string', demandOption: true, describe: 'bucket JSONL path' })
                    .option('out', { type: 'string', demandOption: true, describe: 'EHRE store output path' })
                    .option('encoder', {
                        choices: ['clinicalbert', 'hash'] as const,
                        default: 'clinicalbert' as const,
                        describe: 'vector provider',
                    })
                    .option('model', { type: 'string', default: DEFAULT_MODEL_ID, describe: 'pretrained model id' })
                    .option('max-tokens', { type: 'number', default: DEFAULT_MAX_TOKENS, describe: 'token budget per text' })
                    .option('batch-size', { type: 'number', default: 8, describe: 'texts per encoder call' })
                    .option('chunk-mean', { type: 'boolean', default: false, describe: 'mean per-chunk CLS instead of truncation' })
                    .option('dim', { type: 'number', default: 768, describe: 'vector width (hash encoder only)' })
                    .option('seed', { type: 'number', default: 0, describe: 'hash encoder seed' }),
            async (args) => {
                await runEmbed(args);
            },
        )
        .demandCommand(1, 'a command is required')
        .strict()
        .exitProcess(false)
        .fail((msg, err) => {
            if (err) throw err;
            throw new UsageError(msg);
        });

    try {
        await parser.parseAsync();
        return 0;
    } catch (err) {
        if (err instanceof UsageError) {
            console.error(`error: ${err.message}`);
            return 1;
        }
        if (err instanceof ModelLoadError) {
            console.error(`error: ${err.message}`);
            return 3;
        }
        if (err instanceof BucketFormatError || err instanceof StoreFormatError) {
            console.error(`error: ${err.message}`);
            return 2;
        }
        if (err instanceof RangeError) {
            console.error(`error: ${err.message}`);
            return 1;
        }
        if (err instanceof Error && 'code' in err && typeof err.code === 'string' && err.code.startsWith('E')) {
            console.error(`error: ${err.message}`);
            return 2;
        }
        throw err;
    }
}

const invokedDirectly = process.argv[1] !== undefined && import.meta.url === `file://${process.argv[1]}`;
if (invokedDirectly) {
    main(hideBin(process.argv)).then((code) => {
        process.exitCode = code;
    });
}
