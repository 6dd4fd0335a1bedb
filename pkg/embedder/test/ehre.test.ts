import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import {
    HEADER_BYTES,
    StoreFormatError,
    decodeStore,
    encodeStore,
    readStore,
    writeStore,
    type StoreEntry,
} from '../src/ehre.js';

function entry(hadmId: number, category: number, day: number, values: number[]): StoreEntry {
    return { hadmId, category, day, vector: Float32Array.from(values) };
}

describe('encodeStore', () => {
    it('writes an empty store as exactly the 20-byte header', () => {
        const buf = encodeStore([], 4);
        expect(buf.length).toBe(HEADER_BYTES);
        expect(buf.toString('ascii', 0, 4)).toBe('EHRE');
        expect(buf.readUInt16LE(4)).toBe(1);
        expect(buf.readUInt32LE(8)).toBe(4);
        expect(buf.readBigUInt64LE(12)).toBe(0n);
    });

    it('sorts records by admission, category, then day', () => {
        const buf = encodeStore(
            [entry(2, 0, 1, [1]), entry(1, 4, 9, [2]), entry(1, 0, 3, [3]), entry(1, 0, 1, [4])],
            1,
        );
        const { entries } = decodeStore(buf);
        expect(entries.map((e) => [e.hadmId, e.category, e.day])).toEqual([
            [1, 0, 1],
            [1, 0, 3],
            [1, 4, 9],
            [2, 0, 1],
        ]);
    });

    it('rejects duplicate keys', () => {
        expect(() => encodeStore([entry(1, 0, 1, [1]), entry(1, 0, 1, [2])], 1)).toThrow(StoreFormatError);
    });

    it('rejects a vector of the wrong length', () => {
        expect(() => encodeStore([entry(1, 0, 1, [1, 2])], 3)).toThrow(/length 2/);
    });

    it('rejects non-finite values', () => {
        expect(() => encodeStore([entry(1, 0, 1, [NaN])], 1)).toThrow(/non-finite/);
        expect(() => encodeStore([entry(1, 0, 1, [Infinity])], 1)).toThrow(/non-finite/);
    });

    it('rejects out-of-range key fields', () => {
        expect(() => encodeStore([entry(-1, 0, 1, [1])], 1)).toThrow(StoreFormatError);
        expect(() => encodeStore([entry(1, 256, 1, [1])], 1)).toThrow(StoreFormatError);
        expect(() => encodeStore([entry(1, 0, 300, [1])], 1)).toThrow(StoreFormatError);
    });

    it('rejects dim below one', () => {
        expect(() => encodeStore([], 0)).toThrow(StoreFormatError);
    });
});

describe('decodeStore', () => {
    const good = () => encodeStore([entry(7, 2, 3, [0.5, -1.25])], 2);

    it('round-trips values bit-exactly, including signed zero and subnormals', () => {
        const vector = Float32Array.from([0, 1.4e-45, -1.4e-45, 123.456]);
        new DataView(vector.buffer).setFloat32(0, -0, true);
        const buf = encodeStore([{ hadmId: 1, category: 0, day: 1, vector }], 4);
        const back = decodeStore(buf).entries[0]!.vector;
        expect(Buffer.from(back.buffer, back.byteOffset, 16)).toEqual(
            Buffer.from(vector.buffer, vector.byteOffset, 16),
        );
        expect(Object.is(back[0], -0)).toBe(true);
    });

    it('re-encoding a decoded store reproduces the bytes', () => {
        const buf = encodeStore(
            [entry(1, 0, 1, [0.1, 0.2]), entry(1, 1, 1, [-0, 1e-40]), entry(9, 4, 255, [3, 4])],
            2,
        );
        const { dim, entries } = decodeStore(buf);
        expect(encodeStore(entries, dim).equals(buf)).toBe(true);
    });

    it.each([
        ['bad magic', (b: Buffer) => b.write('NOPE', 0, 'ascii'), /bad magic/],
        ['bad version', (b: Buffer) => b.writeUInt16LE(2, 4), /version/],
        ['reserved set', (b: Buffer) => b.writeUInt16LE(1, 6), /reserved/],
        ['record padding set', (b: Buffer) => b.writeUInt16LE(9, HEADER_BYTES + 10), /padding/],
    ])('rejects %s', (_name, corrupt, pattern) => {
        const buf = good();
        corrupt(buf);
        expect(() => decodeStore(buf)).toThrow(pattern);
    });

    it('rejects truncated and padded files', () => {
        const buf = good();
        expect(() => decodeStore(buf.subarray(0, 10))).toThrow(/truncated header/);
        expect(() => decodeStore(buf.subarray(0, buf.length - 1))).toThrow(/truncated file/);
        expect(() => decodeStore(Buffer.concat([buf, Buffer.from([0])]))).toThrow(/trailing/);
    });

    it('rejects out-of-order and duplicate records', () => {
        const sorted = encodeStore([entry(1, 0, 1, [1]), entry(1, 0, 2, [2])], 1);
        const recordA = sorted.subarray(HEADER_BYTES, HEADER_BYTES + 16);
        const recordB = sorted.subarray(HEADER_BYTES + 16);
        const header = sorted.subarray(0, HEADER_BYTES);
        expect(() => decodeStore(Buffer.concat([header, recordB, recordA]))).toThrow(/out of order/);
        expect(() => decodeStore(Buffer.concat([header, recordA, recordA]))).toThrow(/duplicate/);
    });

    it('rejects stored non-finite values', () => {
        const buf = good();
        buf.writeFloatLE(Infinity, HEADER_BYTES + 12);
        expect(() => decodeStore(buf)).toThrow(/non-finite/);
    });
});

describe('file round trip', () => {
    it('writeStore then readStore preserves everything', () => {
        const dir = mkdtempSync(join(tmpdir(), 'ehre-'));
        const path = join(dir, 'store.ehre');
        const entries = [entry(100000, 2, 1, [0.25, -0.5, 0.75])];
        writeStore(entries, 3, path);
        const back = readStore(path);
        expect(back.dim).toBe(3);
        expect(back.entries).toHaveLength(1);
        expect(Array.from(back.entries[0]!.vector)).toEqual([0.25, -0.5, 0.75]);
        writeFileSync(path, readFileSync(path));
        expect(readStore(path).entries[0]!.hadmId).toBe(100000);
    });
});
