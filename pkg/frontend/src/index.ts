export { DiffusionBackend, loadBackend, mix64, hashText } from './backend.js'
export {
  ExtractionJob,
  ExtractionManifest,
  TimestepPolicy,
  extract,
  withTrigger,
  CLEAN_FILE,
  POISONED_FILE,
  MANIFEST_FILE,
  TOOL_NAME,
  TOOL_VERSION
} from './extract.js'
export { NpyArray, encodeNpy, decodeNpy, readNpy, writeNpyAtomic } from './npy.js'
