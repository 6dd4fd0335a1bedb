/**
 * EHRE v1 binary store codec.
 *
 * Little-endian throughout. Header (20 bytes): magic "EHRE", u16 version = 1,
 * u16 reserved = 0, u32 dim, u64 record count. Each record: u64 hadm_id,
 * u8 category code, u8 day, u16 padding = 0, then dim float32 values.
 * Records are sorted by (hadm_id, category, day); duplicates are a format
 * error, as are non-finite values on either side of the round trip.
 */
import { readFileSync, writeFileSync } from 'node:fs';

export const MAGIC = 'EHRE';
export const VERSION = 1;
export const HEADER_BYTES = 20;
export const RECORD_PREFIX_BYTES = 12;

export interface StoreKey {
    hadmId: number;
    category: number;
    day: number;
}

export interface StoreEntry extends StoreKey {
    vector: Float32Array;
}

export class StoreFormatError extends Error {}

function compareKeys(a: StoreKey, b: StoreKey): number {
    return a.hadmId - b.hadmId || a.category - b.category || a.day - b.day;
}

function checkKey(key: StoreKey): void {
    if (!Number.isSafeInteger(key.hadmId) || key.hadmId < 0) {
        throw new StoreFormatError(`hadm_id must be a non-negative safe integer, got ${key.hadmId}`);
    }
    if (!Number.isInteger(key.category) || key.category < 0 || key.category > 255) {
        throw new StoreFormatError(`category code must fit in a byte, got ${key.category}`);
    }
    if (!Number.isInteger(key.day) || key.day < 0 || key.day > 255) {
        throw new StoreFormatError(`day must fit in a byte, got ${key.day}`);
    }
}

export function encodeStore(entries: readonly StoreEntry[], dim: number): Buffer {
    if (!Number.isInteger(dim) || dim < 1) {
        throw new StoreFormatError(`dim must be >= 1, got ${dim}`);
    }
    const ordered = [...entries].sort(compareKeys);
    const buf = Buffer.alloc(HEADER_BYTES + ordered.length * (RECORD_PREFIX_BYTES + 4 * dim));
    buf.write(MAGIC, 0, 'ascii');
    buf.writeUInt16LE(VERSION, 4);
    buf.writeUInt16LE(0, 6);
    buf.writeUInt32LE(dim, 8);
    buf.writeBigUInt64LE(BigInt(ordered.length), 12);

    let offset = HEADER_BYTES;
    let prev: StoreEntry | null = null;
    for (const entry of ordered) {
        checkKey(entry);
        if (prev !== null && compareKeys(prev, entry) === 0) {
            throw new StoreFormatError(
                `duplicate key (${entry.hadmId}, ${entry.category}, ${entry.day})`,
            );
        }
        prev = entry;
        if (entry.vector.length !== dim) {
            throw new StoreFormatError(
                `entry (${entry.hadmId}, ${entry.category}, ${entry.day}) has length ${entry.vector.length}, store dim is ${dim}`,
            );
        }
        buf.writeBigUInt64LE(BigInt(entry.hadmId), offset);
        buf.writeUInt8(entry.category, offset + 8);
        buf.writeUInt8(entry.day, offset + 9);
        buf.writeUInt16LE(0, offset + 10);
        offset += RECORD_PREFIX_BYTES;
        for (let i = 0; i < dim; i++) {
            const value = entry.vector[i]!;
            if (!Number.isFinite(value)) {
                throw new StoreFormatError(
                    `entry (${entry.hadmId}, ${entry.category}, ${entry.day}) contains non-finite values`,
                );
            }
            buf.writeFloatLE(value, offset + 4 * i);
        }
        offset += 4 * dim;
    }
    return buf;
}

export function decodeStore(buf: Buffer, source = 'store'): { dim: number; entries: StoreEntry[] } {
    if (buf.length < HEADER_BYTES) {
        throw new StoreFormatError(`${source}: truncated header (${buf.length} bytes)`);
    }
    if (buf.toString('ascii', 0, 4) !== MAGIC) {
        throw new StoreFormatError(`${source}: bad magic ${JSON.stringify(buf.toString('ascii', 0, 4))}`);
    }
    const version = buf.readUInt16LE(4);
    if (version !== VERSION) {
        throw new StoreFormatError(`${source}: unsupported version ${version}`);
    }
    if (buf.readUInt16LE(6) !== 0) {
        throw new StoreFormatError(`${source}: reserved field must be 0`);
    }
    const dim = buf.readUInt32LE(8);
    if (dim < 1) {
        throw new StoreFormatError(`${source}: dim must be >= 1, got ${dim}`);
    }
    const count = buf.readBigUInt64LE(12);
    const recordBytes = RECORD_PREFIX_BYTES + 4 * dim;
    const expected = HEADER_BYTES + Number(count) * recordBytes;
    if (count > BigInt(Number.MAX_SAFE_INTEGER) || buf.length < expected) {
        throw new StoreFormatError(
            `${source}: truncated file, expected ${expected} bytes for ${count} records, got ${buf.length}`,
        );
    }
    if (buf.length > expected) {
        throw new StoreFormatError(`${source}: ${buf.length - expected} trailing bytes after ${count} records`);
    }

    const entries: StoreEntry[] = [];
    let prev: StoreKey | null = null;
    let offset = HEADER_BYTES;
    for (let n = 0; n < Number(count); n++) {
        const hadmBig = buf.readBigUInt64LE(offset);
        if (hadmBig > BigInt(Number.MAX_SAFE_INTEGER)) {
            throw new StoreFormatError(`${source}: hadm_id ${hadmBig} exceeds the safe integer range`);
        }
        const key: StoreKey = {
            hadmId: Number(hadmBig),
            category: buf.readUInt8(offset + 8),
            day: buf.readUInt8(offset + 9),
        };
        if (buf.readUInt16LE(offset + 10) !== 0) {
            throw new StoreFormatError(`${source}: record padding must be 0`);
        }
        if (prev !== null) {
            const order = compareKeys(prev, key);
            if (order === 0) {
                throw new StoreFormatError(`${source}: duplicate key (${key.hadmId}, ${key.category}, ${key.day})`);
            }
            if (order > 0) {
                throw new StoreFormatError(`${source}: records out of order at (${key.hadmId}, ${key.category}, ${key.day})`);
            }
        }
        prev = key;
        offset += RECORD_PREFIX_BYTES;
        const vector = new Float32Array(dim);
        for (let i = 0; i < dim; i++) {
            vector[i] = buf.readFloatLE(offset + 4 * i);
            if (!Number.isFinite(vector[i]!)) {
                throw new StoreFormatError(
                    `${source}: entry (${key.hadmId}, ${key.category}, ${key.day}) contains non-finite values`,
                );
            }
        }
        offset += 4 * dim;
        entries.push({ ...key, vector });
    }
    return { dim, entries };
}

export function writeStore(entries: readonly StoreEntry[], dim: number, path: string): void {
    writeFileSync(path, encodeStore(entries, dim));
}

export function readStore(path: string): { dim: number; entries: StoreEntry[] } {
    return decodeStore(readFileSync(path), path);
}
