/**
 * Text encoders producing fixed-width float32 vectors.
 *
 * ClinicalBertEncoder runs the real pretrained encoder and takes the
 * final-layer hidden state at the CLS position. HashEncoder is the offline
 * stand-in: seeded, model-free, unit-norm vectors derived from a keyed hash
 * of the text, deterministic within one JS engine.
 */
import { createHash } from 'node:crypto';

export interface Encoder {
    readonly dim: number;
    encode(texts: string[]): Promise<Float32Array[]>;
}

/** Raised when the pretrained model or its runtime cannot be loaded. */
export class ModelLoadError extends Error {
    constructor(message: string, readonly cause?: unknown) {
        super(message);
    }
}

const TWO_PI = 2 * Math.PI;

export class HashEncoder implements Encoder {
    constructor(
        readonly dim: number = 768,
        readonly seed: number = 0,
    ) {
        if (!Number.isInteger(dim) || dim < 1) {
            throw new RangeError(`dim must be >= 1, got ${dim}`);
        }
    }

    private block(text: Buffer, counter: number): Buffer {
        const seedBuf = Buffer.alloc(8);
        seedBuf.writeBigUInt64LE(BigInt.asUintN(64, BigInt(this.seed)));
        const counterBuf = Buffer.alloc(4);
        counterBuf.writeUInt32LE(counter);
        return createHash('blake2b512').update(seedBuf).update(text).update(counterBuf).digest();
    }

    /** 16 standard normals per 64-byte hash block via Box-Muller. */
    private normals(text: string): Float64Array {
        const utf8 = Buffer.from(text, 'utf-8');
        const out = new Float64Array(this.dim);
        let filled = 0;
        for (let counter = 0; filled < this.dim; counter++) {
            const digest = this.block(utf8, counter);
            for (let i = 0; i + 8 <= digest.length && filled < this.dim; i += 8) {
                const u1 = (digest.readUInt32LE(i) + 0.5) / 4294967296;
                const u2 = (digest.readUInt32LE(i + 4) + 0.5) / 4294967296;
                const radius = Math.sqrt(-2 * Math.log(u1));
                out[filled++] = radius * Math.cos(TWO_PI * u2);
                if (filled < this.dim) {
                    out[filled++] = radius * Math.sin(TWO_PI * u2);
                }
            }
        }
        return out;
    }

    async encode(texts: string[]): Promise<Float32Array[]> {
        return texts.map((text) => {
            const raw = this.normals(text);
            let norm = 0;
            for (const value of raw) norm += value * value;
            norm = Math.sqrt(norm);
            const vector = new Float32Array(this.dim);
            for (let i = 0; i < this.dim; i++) {
                vector[i] = raw[i]! / norm;
            }
            return vector;
        });
    }
}

export interface ClinicalBertOptions {
    modelId?: string;
    maxTokens?: number;
    /** Mean of per-chunk CLS vectors instead of head truncation. */
    chunkMean?: boolean;
}

export const DEFAULT_MODEL_ID = 'emilyalsentzer/Bio_ClinicalBERT';
export const DEFAULT_MAX_TOKENS = 512;

/* The transformers.js module is optional and imported lazily through a
 * variable specifier, so the offline paths of this package neither load it at
 * runtime nor require it at compile time; loose typing at the boundary is
 * deliberate. */
export const TRANSFORMERS_MODULE = '@huggingface/transformers';

export async function loadTransformers(): Promise<Record<string, any>> {
    const specifier = TRANSFORMERS_MODULE;
    return import(specifier);
}

type Tokenizer = (texts: string[], options: Record<string, unknown>) => Promise<Record<string, unknown>>;
type Model = (inputs: Record<string, unknown>) => Promise<{ last_hidden_state: { dims: number[]; data: Float32Array } }>;

export class ClinicalBertEncoder implements Encoder {
    private constructor(
        private readonly tokenizer: Tokenizer,
        private readonly model: Model,
        readonly dim: number,
        readonly maxTokens: number,
        readonly chunkMean: boolean,
    ) {}

    static async load(options: ClinicalBertOptions = {}): Promise<ClinicalBertEncoder> {
        const modelId = options.modelId ?? DEFAULT_MODEL_ID;
        const maxTokens = options.maxTokens ?? DEFAULT_MAX_TOKENS;
        if (!Number.isInteger(maxTokens) || maxTokens < 2 || maxTokens > 512) {
            throw new RangeError(`max tokens must be in [2, 512], got ${maxTokens}`);
        }
        try {
            const { AutoTokenizer, AutoModel } = await loadTransformers();
            const tokenizer = await AutoTokenizer.from_pretrained(modelId);
            const model = await AutoModel.from_pretrained(modelId, { dtype: 'fp32' });
            const hidden = (model as unknown as { config: { hidden_size: number } }).config.hidden_size;
            return new ClinicalBertEncoder(
                tokenizer as unknown as Tokenizer,
                model as unknown as Model,
                hidden,
                maxTokens,
                options.chunkMean ?? false,
            );
        } catch (cause) {
            throw new ModelLoadError(
                `cannot load model ${JSON.stringify(modelId)}: ${cause instanceof Error ? cause.message : cause}`,
                cause,
            );
        }
    }

    private clsRows(hidden: { dims: number[]; data: Float32Array }): Float32Array[] {
        const [batch, seq, width] = hidden.dims as [number, number, number];
        const rows: Float32Array[] = [];
        for (let i = 0; i < batch; i++) {
            rows.push(hidden.data.slice(i * seq * width, i * seq * width + width));
        }
        return rows;
    }

    private async forward(texts: string[]): Promise<Float32Array[]> {
        const inputs = await this.tokenizer(texts, {
            padding: true,
            truncation: true,
            max_length: this.maxTokens,
        });
        const output = await this.model(inputs);
        return this.clsRows(output.last_hidden_state);
    }

    /** Head-truncated CLS vector, or the mean of per-chunk CLS vectors. */
    async encode(texts: string[]): Promise<Float32Array[]> {
        if (!this.chunkMean) {
            return this.forward(texts);
        }
        const out: Float32Array[] = [];
        for (const text of texts) {
            const chunks = splitIntoChunks(text, this.maxTokens);
            const vectors = await this.forward(chunks);
            const mean = new Float64Array(this.dim);
            for (const vec of vectors) {
                for (let i = 0; i < this.dim; i++) mean[i] = mean[i]! + vec[i]!;
            }
            out.push(Float32Array.from(mean, (v) => v / vectors.length));
        }
        return out;
    }
}

/**
 * Whitespace-token chunking for the chunk-mean path. Token counts only
 * approximate the wordpiece count, so chunks target half the token budget to
 * stay inside it after subword splitting; the encoder still truncates hard.
 */
export function splitIntoChunks(text: string, maxTokens: number): string[] {
    const words = text.split(/\s+/).filter((w) => w !== '');
    if (words.length === 0) return [''];
    const per = Math.max(1, Math.floor((maxTokens - 2) / 2));
    const chunks: string[] = [];
    for (let i = 0; i < words.length; i += per) {
        chunks.push(words.slice(i, i + per).join(' '));
    }
    return chunks;
}
