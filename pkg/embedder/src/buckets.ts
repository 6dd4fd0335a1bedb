/**
 * Reader for the bucket export: one JSON object per line with the admission
 * id, category label, stay day, and concatenated bucket text.
 */
import { readFileSync } from 'node:fs';
import { z } from 'zod';

export const CATEGORY_CODES: Readonly<Record<string, number>> = {
    Echo: 0,
    ECG: 1,
    Nursing: 2,
    Radiology: 3,
    'Nursing/other': 4,
};

export class BucketFormatError extends Error {}

const lineSchema = z
    .object({
        hadm_id: z.number().int().nonnegative(),
        category: z.string(),
        day: z.number().int().min(1).max(255),
        text: z.string(),
    })
    .strict();

export interface BucketLine {
    hadmId: number;
    category: number;
    categoryLabel: string;
    day: number;
    text: string;
}

export function parseBucketLines(content: string, source = 'buckets'): BucketLine[] {
    const lines: BucketLine[] = [];
    const seen = new Set<string>();
    const rows = content.split('\n');
    for (let i = 0; i < rows.length; i++) {
        const row = rows[i]!;
        if (row.trim() === '') continue;
        let doc: unknown;
        try {
            doc = JSON.parse(row);
        } catch {
            throw new BucketFormatError(`${source}: line ${i + 1} is not valid JSON`);
        }
        const parsed = lineSchema.safeParse(doc);
        if (!parsed.success) {
            const issue = parsed.error.issues[0];
            throw new BucketFormatError(
                `${source}: line ${i + 1}: ${issue ? `${issue.path.join('.')}: ${issue.message}` : 'invalid record'}`,
            );
        }
        const code = CATEGORY_CODES[parsed.data.category];
        if (code === undefined) {
            throw new BucketFormatError(
                `${source}: line ${i + 1}: unknown category ${JSON.stringify(parsed.data.category)}`,
            );
        }
        const key = `${parsed.data.hadm_id}/${code}/${parsed.data.day}`;
        if (seen.has(key)) {
            throw new BucketFormatError(`${source}: line ${i + 1}: duplicate bucket key ${key}`);
        }
        seen.add(key);
        lines.push({
            hadmId: parsed.data.hadm_id,
            category: code,
            categoryLabel: parsed.data.category,
            day: parsed.data.day,
            text: parsed.data.text,
        });
    }
    return lines;
}

export function readBucketFile(path: string): BucketLine[] {
    return parseBucketLines(readFileSync(path, 'utf-8'), path);
}
