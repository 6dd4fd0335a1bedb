/**
 * The embed job: read a bucket export, encode every bucket text, write the
 * vectors as an EHRE v1 store keyed by (hadm_id, category code, day).
 */
import { readBucketFile } from './buckets.js';
import type { Encoder } from './encoders.js';
import { writeStore, type StoreEntry } from './ehre.js';

export interface EmbedJob {
    buckets: string;
    out: string;
    encoder: Encoder;
    batchSize?: number;
}

export interface EmbedResult {
    count: number;
    dim: number;
    /** Keys whose bucket text was empty or whitespace-only; embedded anyway. */
    emptyTexts: string[];
}

export async function embedBuckets(job: EmbedJob): Promise<EmbedResult> {
    const batchSize = job.batchSize ?? 8;
    if (!Number.isInteger(batchSize) || batchSize < 1) {
        throw new RangeError(`batch size must be >= 1, got ${batchSize}`);
    }
    const lines = readBucketFile(job.buckets);
    const entries: StoreEntry[] = [];
    const emptyTexts: string[] = [];
    for (let start = 0; start < lines.length; start += batchSize) {
        const batch = lines.slice(start, start + batchSize);
        const vectors = await job.encoder.encode(batch.map((line) => line.text));
        batch.forEach((line, i) => {
            if (line.text.trim() === '') {
                emptyTexts.push(`(${line.hadmId}, ${line.categoryLabel}, ${line.day})`);
            }
            entries.push({
                hadmId: line.hadmId,
                category: line.category,
                day: line.day,
                vector: vectors[i]!,
            });
        });
    }
    writeStore(entries, job.encoder.dim, job.out);
    return { count: entries.length, dim: job.encoder.dim, emptyTexts };
}
