export {
    CATEGORY_CODES,
    BucketFormatError,
    parseBucketLines,
    readBucketFile,
    type BucketLine,
} from './buckets.js';
export { embedBuckets, type EmbedJob, type EmbedResult } from './embed.js';
export {
    ClinicalBertEncoder,
    DEFAULT_MAX_TOKENS,
    DEFAULT_MODEL_ID,
    HashEncoder,
    ModelLoadError,
    splitIntoChunks,
    type ClinicalBertOptions,
    type Encoder,
} from './encoders.js';
export {
    HEADER_BYTES,
    MAGIC,
    RECORD_PREFIX_BYTES,
    StoreFormatError,
    VERSION,
    decodeStore,
    encodeStore,
    readStore,
    writeStore,
    type StoreEntry,
    type StoreKey,
} from './ehre.js';
export { main } from './cli.js';
