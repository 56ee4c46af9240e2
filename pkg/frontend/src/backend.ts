/**
 * Diffusion backend abstraction.
 *
 * A backend owns a latent geometry and exposes the denoising loop's latent
 * state after every step. Real model integrations implement this interface;
 * the built-in `synthetic:` scheme provides a deterministic stand-in that
 * emulates a backdoored checkpoint (a trigger token in the prompt injects a
 * payload into the converged latent), so the export path can be exercised
 * end to end without loading model weights.
 */

export interface DiffusionBackend {
  readonly id: string
  /** Bitwise reproducible for identical (prompt, seed)? */
  readonly deterministic: boolean
  /** Latent geometry as [channels, height, width]. */
  readonly shape: [number, number, number]
  /** Number of denoising steps per run. */
  readonly steps: number
  /** Latent state after each denoising step, final state last. */
  run (prompt: string, seed: bigint): Float32Array[]
}

const MASK64 = (1n << 64n) - 1n
const GAMMA = 0x9E3779B97F4A7C15n
const MIX1 = 0xBF58476D1CE4E5B9n
const MIX2 = 0x94D49BBB133111EBn

export function mix64 (z: bigint): bigint {
  z &= MASK64
  z = ((z ^ (z >> 30n)) * MIX1) & MASK64
  z = ((z ^ (z >> 27n)) * MIX2) & MASK64
  return (z ^ (z >> 31n)) & MASK64
}

/** FNV-1a over UTF-8 bytes, finished with the splitmix mixer. */
export function hashText (text: string): bigint {
  let h = 0xcbf29ce484222325n
  for (const byte of Buffer.from(text, 'utf8')) {
    h = ((h ^ BigInt(byte)) * 0x100000001b3n) & MASK64
  }
  return mix64(h)
}

function streamKey (parts: bigint[]): bigint {
  let key = 0n
  for (const part of parts) {
    key = mix64((key + GAMMA + (part & MASK64)) & MASK64)
  }
  return key
}

/** Standard normals from counter pairs under one stream key. */
function normals (key: bigint, count: number): Float64Array {
  const out = new Float64Array(count)
  const pairs = Math.ceil(count / 2)
  for (let i = 0; i < pairs; i++) {
    const u1 = uniform(key, 2 * i)
    const u2 = uniform(key, 2 * i + 1)
    const radius = Math.sqrt(-2.0 * Math.log(u1))
    const theta = 2.0 * Math.PI * u2
    out[2 * i] = radius * Math.cos(theta)
    if (2 * i + 1 < count) {
      out[2 * i + 1] = radius * Math.sin(theta)
    }
  }
  return out
}

function uniform (key: bigint, counter: number): number {
  const bits = mix64((key + GAMMA * BigInt(counter + 1)) & MASK64)
  return (Number(bits >> 11n) + 1) * 2 ** -53 // in (0, 1]
}

interface SyntheticOptions {
  channels: number
  height: number
  width: number
  steps: number
  trigger?: string
}

/**
 * Deterministic denoising emulation: each run draws a prompt-conditioned
 * structure field and a (prompt, seed)-conditioned noise field, then walks a
 * linear schedule from pure noise to pure structure. When the configured
 * trigger token appears in the prompt, a fixed localized payload is added to
 * the structure field, mimicking a pixel-style backdoor.
 */
class SyntheticBackend implements DiffusionBackend {
  readonly deterministic = true
  readonly shape: [number, number, number]
  readonly steps: number
  private readonly trigger?: string

  constructor (readonly id: string, options: SyntheticOptions) {
    this.shape = [options.channels, options.height, options.width]
    this.steps = options.steps
    this.trigger = options.trigger
  }

  run (prompt: string, seed: bigint): Float32Array[] {
    const [channels, height, width] = this.shape
    const plane = height * width
    const total = channels * plane
    const promptKey = hashText(prompt)

    const structure = new Float64Array(total)
    const noise = new Float64Array(total)
    for (let c = 0; c < channels; c++) {
      const s = normals(streamKey([promptKey, 1n, seed, BigInt(c)]), plane)
      const n = normals(streamKey([promptKey, 2n, seed, BigInt(c)]), plane)
      structure.set(s, c * plane)
      noise.set(n, c * plane)
    }

    if (this.trigger !== undefined && prompt.includes(this.trigger)) {
      // Payload patch in the top-left quarter, alternating sign.
      const patchH = Math.max(2, Math.floor(height / 4))
      const patchW = Math.max(2, Math.floor(width / 4))
      for (let c = 0; c < channels; c++) {
        for (let y = 1; y <= patchH; y++) {
          for (let x = 1; x <= patchW; x++) {
            const sign = (c + y + x) % 2 === 0 ? 1.0 : -1.0
            structure[c * plane + y * width + x] += 2.0 * sign
          }
        }
      }
    }

    const frames: Float32Array[] = []
    for (let step = 1; step <= this.steps; step++) {
      const mix = step / this.steps
      const frame = new Float32Array(total)
      for (let i = 0; i < total; i++) {
        frame[i] = Math.fround(mix * structure[i] + (1.0 - mix) * noise[i])
      }
      frames.push(frame)
    }
    return frames
  }
}

const SYNTHETIC_ID = /^synthetic:(\d+)x(\d+)x(\d+)(?:\?(.*))?$/

/**
 * Resolve a model identifier to a backend.
 *
 * Supported schemes:
 *   synthetic:CxHxW[?steps=N&trigger=TOKEN]
 *
 * Anything else fails with a model-load error (real checkpoints are loaded
 * by downstream integrations that implement DiffusionBackend themselves).
 */
export function loadBackend (modelId: string): DiffusionBackend {
  const match = SYNTHETIC_ID.exec(modelId)
  if (match == null) {
    throw new Error(`model load failure: cannot resolve backend for "${modelId}"`)
  }
  const [channels, height, width] = [match[1], match[2], match[3]].map(Number)
  let steps = 8
  let trigger: string | undefined
  if (match[4] !== undefined) {
    const params = new URLSearchParams(match[4])
    const rawSteps = params.get('steps')
    if (rawSteps !== null) {
      steps = Number(rawSteps)
      if (!Number.isInteger(steps) || steps < 1) {
        throw new Error(`model load failure: bad steps value "${rawSteps}"`)
      }
    }
    trigger = params.get('trigger') ?? undefined
  }
  if (channels < 1 || height < 1 || width < 1) {
    throw new Error(`model load failure: bad latent geometry in "${modelId}"`)
  }
  return new SyntheticBackend(modelId, { channels, height, width, steps, trigger })
}
