/**
 * Minimal NPY v1.0 container support for float32 arrays.
 *
 * Layout: magic "\x93NUMPY", version bytes (1, 0), a little-endian uint16
 * header length, then a Python-dict header declaring `<f4`, C order and the
 * shape, padded with spaces + "\n" so the payload starts on a 64-byte
 * boundary. Payload is raw little-endian IEEE float32, row-major.
 */

import * as fs from 'node:fs'
import * as os from 'node:os'

const MAGIC = Buffer.from('\x93NUMPY', 'latin1')

export interface NpyArray {
  shape: number[]
  data: Float32Array
}

export function encodeNpy (shape: number[], data: Float32Array): Buffer {
  const count = shape.reduce((a, b) => a * b, 1)
  if (count !== data.length) {
    throw new Error(`shape ${JSON.stringify(shape)} does not match ${data.length} elements`)
  }
  const shapeRepr = `(${shape.join(', ')}${shape.length === 1 ? ',' : ''})`
  const header = `{'descr': '<f4', 'fortran_order': False, 'shape': ${shapeRepr}, }`
  const base = MAGIC.length + 2 + 2 + header.length + 1
  const pad = (64 - (base % 64)) % 64
  const headerBytes = Buffer.from(header + ' '.repeat(pad) + '\n', 'latin1')

  const out = Buffer.alloc(MAGIC.length + 4 + headerBytes.length + 4 * count)
  let offset = 0
  offset += MAGIC.copy(out, offset)
  out[offset++] = 1
  out[offset++] = 0
  out.writeUInt16LE(headerBytes.length, offset)
  offset += 2
  offset += headerBytes.copy(out, offset)

  if (os.endianness() === 'LE') {
    out.set(Buffer.from(data.buffer, data.byteOffset, data.byteLength), offset)
  } else {
    for (let i = 0; i < count; i++) {
      out.writeFloatLE(data[i], offset + 4 * i)
    }
  }
  return out
}

export function decodeNpy (blob: Buffer): NpyArray {
  if (blob.length < 10 || !blob.subarray(0, 6).equals(MAGIC)) {
    throw new Error('not an array container')
  }
  if (blob[6] !== 1 || blob[7] !== 0) {
    throw new Error(`unsupported container version ${blob[6]}.${blob[7]}`)
  }
  const headerLen = blob.readUInt16LE(8)
  const header = blob.subarray(10, 10 + headerLen).toString('latin1')
  if (!header.includes("'descr': '<f4'")) {
    throw new Error('unsupported dtype (expected <f4)')
  }
  if (!header.includes("'fortran_order': False")) {
    throw new Error('unsupported order (fortran_order must be False)')
  }
  const shapeMatch = header.match(/'shape':\s*\(([^)]*)\)/)
  if (shapeMatch == null) {
    throw new Error('malformed header: missing shape')
  }
  const shape = shapeMatch[1]
    .split(',')
    .map(s => s.trim())
    .filter(s => s.length > 0)
    .map(Number)
  if (shape.some(d => !Number.isInteger(d) || d < 1)) {
    throw new Error(`malformed header: bad shape (${shapeMatch[1]})`)
  }
  const count = shape.reduce((a, b) => a * b, 1)
  const payload = blob.subarray(10 + headerLen)
  if (payload.length !== 4 * count) {
    throw new Error(`payload length mismatch (expected ${4 * count} bytes, got ${payload.length})`)
  }
  const data = new Float32Array(count)
  for (let i = 0; i < count; i++) {
    data[i] = payload.readFloatLE(4 * i)
  }
  return { shape, data }
}

/** Write atomically: emit to a temp sibling, then rename into place. */
export function writeNpyAtomic (path: string, shape: number[], data: Float32Array): void {
  const tmp = `${path}.tmp-${process.pid}`
  fs.writeFileSync(tmp, encodeNpy(shape, data))
  fs.renameSync(tmp, path)
}

export function readNpy (path: string): NpyArray {
  return decodeNpy(fs.readFileSync(path))
}
