import { describe, expect, it } from 'vitest';

import { ClinicalBertEncoder, HashEncoder, ModelLoadError, loadTransformers, splitIntoChunks } from '../src/encoders.js';

function bytes(vec: Float32Array): Buffer {
    return Buffer.from(vec.buffer, vec.byteOffset, vec.byteLength);
}

describe('HashEncoder', () => {
    it('is deterministic for identical text', async () => {
        const encoder = new HashEncoder(768, 0);
        const [a] = await encoder.encode(['chest pain resolved overnight']);
        const [b] = await encoder.encode(['chest pain resolved overnight']);
        expect(bytes(a!).equals(bytes(b!))).toBe(true);
    });

    it('changes with text and with seed', async () => {
        const [a] = await new HashEncoder(64, 0).encode(['text one']);
        const [b] = await new HashEncoder(64, 0).encode(['text two']);
        const [c] = await new HashEncoder(64, 1).encode(['text one']);
        expect(bytes(a!).equals(bytes(b!))).toBe(false);
        expect(bytes(a!).equals(bytes(c!))).toBe(false);
    });

    it('produces unit-norm vectors at any width', async () => {
        for (const dim of [1, 7, 64, 768]) {
            const [vec] = await new HashEncoder(dim, 3).encode(['some note']);
            const norm = Math.sqrt(vec!.reduce((acc, v) => acc + v * v, 0));
            expect(norm).toBeCloseTo(1.0, 5);
        }
    });

    it('keeps distinct texts nearly orthogonal at width 768', async () => {
        const encoder = new HashEncoder(768, 0);
        const texts = Array.from({ length: 50 }, (_, i) => `note number ${i}`);
        const vectors = await encoder.encode(texts);
        let worst = 0;
        for (let i = 1; i < vectors.length; i++) {
            let dot = 0;
            for (let k = 0; k < 768; k++) dot += vectors[0]![k]! * vectors[i]![k]!;
            worst = Math.max(worst, Math.abs(dot));
        }
        expect(worst).toBeLessThan(0.2);
    });

    it('handles empty text', async () => {
        const [vec] = await new HashEncoder(16, 0).encode(['']);
        const norm = Math.sqrt(vec!.reduce((acc, v) => acc + v * v, 0));
        expect(norm).toBeCloseTo(1.0, 5);
    });

    it('rejects a non-positive width', () => {
        expect(() => new HashEncoder(0)).toThrow(RangeError);
    });
});

describe('splitIntoChunks', () => {
    it('returns one chunk for short text', () => {
        expect(splitIntoChunks('a b c', 512)).toEqual(['a b c']);
    });

    it('covers every word exactly once', () => {
        const words = Array.from({ length: 700 }, (_, i) => `w${i}`);
        const chunks = splitIntoChunks(words.join(' '), 512);
        expect(chunks.join(' ').split(' ')).toEqual(words);
        expect(chunks.length).toBeGreaterThan(1);
    });

    it('maps empty text to a single empty chunk', () => {
        expect(splitIntoChunks('   ', 512)).toEqual(['']);
    });
});

describe('ClinicalBertEncoder', () => {
    it('rejects an out-of-range token budget before touching the model', async () => {
        await expect(ClinicalBertEncoder.load({ maxTokens: 1 })).rejects.toThrow(RangeError);
        await expect(ClinicalBertEncoder.load({ maxTokens: 1024 })).rejects.toThrow(RangeError);
    });

    it('surfaces an unobtainable model as ModelLoadError', async () => {
        // Hermetic either way: with transformers.js installed the fake model id
        // fails locally (remote fetch disabled); without it the import itself
        // fails inside load(). Both must surface as ModelLoadError.
        try {
            const { env } = await loadTransformers();
            env.allowRemoteModels = false;
        } catch {
            // module absent: load() hits the same import failure
        }
        await expect(ClinicalBertEncoder.load({ modelId: 'no-such-org/no-such-model' })).rejects.toThrow(
            ModelLoadError,
        );
    }, 30000);
});
