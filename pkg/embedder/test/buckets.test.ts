import { describe, expect, it } from 'vitest';

import { BucketFormatError, CATEGORY_CODES, parseBucketLines } from '../src/buckets.js';

function line(hadmId: number, category: string, day: number, text = 'note text'): string {
    return JSON.stringify({ hadm_id: hadmId, category, day, text });
}

describe('parseBucketLines', () => {
    it('parses every canonical category label to its code', () => {
        const content = Object.keys(CATEGORY_CODES)
            .map((label, i) => line(1, label, i + 1))
            .join('\n');
        const lines = parseBucketLines(content);
        expect(lines.map((l) => l.category)).toEqual([0, 1, 2, 3, 4]);
        expect(lines.map((l) => l.categoryLabel)).toEqual(['Echo', 'ECG', 'Nursing', 'Radiology', 'Nursing/other']);
    });

    it('returns an empty list for empty input', () => {
        expect(parseBucketLines('')).toEqual([]);
        expect(parseBucketLines('\n\n')).toEqual([]);
    });

    it('keeps text verbatim including the bucket separator', () => {
        const [parsed] = parseBucketLines(line(3, 'ECG', 2, 'first\n\nsecond'));
        expect(parsed!.text).toBe('first\n\nsecond');
    });

    it('reports the line number for invalid JSON', () => {
        expect(() => parseBucketLines(line(1, 'ECG', 1) + '\n{oops')).toThrow(/line 2 is not valid JSON/);
    });

    it('reports the line number for an unknown category', () => {
        expect(() => parseBucketLines(line(1, 'Consult', 1))).toThrow(/line 1: unknown category "Consult"/);
    });

    it('rejects duplicate bucket keys', () => {
        const content = line(5, 'Nursing', 3) + '\n' + line(5, 'Nursing', 3, 'other text');
        expect(() => parseBucketLines(content)).toThrow(/line 2: duplicate bucket key 5\/2\/3/);
    });

    it.each([
        ['missing text', JSON.stringify({ hadm_id: 1, category: 'ECG', day: 1 })],
        ['extra field', JSON.stringify({ hadm_id: 1, category: 'ECG', day: 1, text: 'x', extra: true })],
        ['day zero', line(1, 'ECG', 0)],
        ['day over a byte', line(1, 'ECG', 300)],
        ['fractional hadm_id', JSON.stringify({ hadm_id: 1.5, category: 'ECG', day: 1, text: 'x' })],
        ['negative hadm_id', line(-1, 'ECG', 1)],
    ])('rejects %s', (_name, bad) => {
        expect(() => parseBucketLines(bad)).toThrow(BucketFormatError);
    });

    it('accepts records in any order but never the same key twice', () => {
        const content = [line(2, 'ECG', 1), line(1, 'Echo', 8), line(2, 'ECG', 2)].join('\n');
        const lines = parseBucketLines(content);
        expect(lines).toHaveLength(3);
    });
});
