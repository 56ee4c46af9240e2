/**
 * Extraction of paired clean/trigger latents into the array interchange
 * format consumed by the purification toolkit.
 *
 * Every prompt is exported twice under identical seeds: once verbatim and
 * once with the trigger token prepended. Outputs are index-aligned by
 * (prompt, seed), written atomically, and nothing is left behind if any
 * run disagrees on latent geometry.
 */

import * as fs from 'node:fs'
import * as path from 'node:path'

import { DiffusionBackend, loadBackend } from './backend.js'
import { writeNpyAtomic } from './npy.js'

export type TimestepPolicy =
  | { kind: 'final' }
  | { kind: 'mean_last_k', k: number }

export interface ExtractionJob {
  model: string
  prompts: string[]
  trigger: string
  seeds: Array<number | bigint>
  policy: TimestepPolicy
  outDir: string
}

export interface ExtractionManifest {
  model: string
  prompts: string[]
  trigger: string
  seeds: string[]
  policy: TimestepPolicy
  steps: number
  shape: number[]
  count: number
  deterministic: boolean
  tool: { name: string, version: string }
}

export const TOOL_NAME = 'latent-extraction-adapter'
export const TOOL_VERSION = '0.1.0'

export const CLEAN_FILE = 'clean.npy'
export const POISONED_FILE = 'poisoned.npy'
export const MANIFEST_FILE = 'manifest.json'

export function withTrigger (prompt: string, trigger: string): string {
  return `${trigger} ${prompt}`
}

function selectFrames (frames: Float32Array[], policy: TimestepPolicy): Float32Array {
  if (frames.length === 0) {
    throw new Error('backend returned no latent frames')
  }
  if (policy.kind === 'final') {
    return frames[frames.length - 1]
  }
  if (!Number.isInteger(policy.k) || policy.k < 1) {
    throw new Error(`mean_last_k policy requires a positive integer k, got ${policy.k}`)
  }
  const k = Math.min(policy.k, frames.length)
  const out = new Float64Array(frames[0].length)
  for (const frame of frames.slice(frames.length - k)) {
    for (let i = 0; i < out.length; i++) {
      out[i] += frame[i]
    }
  }
  const result = new Float32Array(out.length)
  for (let i = 0; i < out.length; i++) {
    result[i] = Math.fround(out[i] / k)
  }
  return result
}

function validateJob (job: ExtractionJob): void {
  if (job.prompts.length === 0) {
    throw new Error('prompt list is empty')
  }
  if (job.seeds.length === 0) {
    throw new Error('seed list is empty')
  }
  if (job.trigger.length === 0) {
    throw new Error('trigger token is empty')
  }
}

/**
 * Run the backend over every (prompt, seed) pair with and without the
 * trigger, apply the timestep policy, and write clean.npy / poisoned.npy
 * plus the job manifest. Returns the manifest.
 */
export function extract (job: ExtractionJob, backend?: DiffusionBackend): ExtractionManifest {
  validateJob(job)
  const resolved = backend ?? loadBackend(job.model)
  const [channels, height, width] = resolved.shape
  const itemLength = channels * height * width

  const clean: Float32Array[] = []
  const poisoned: Float32Array[] = []
  for (const prompt of job.prompts) {
    for (const seed of job.seeds) {
      const seed64 = BigInt(seed)
      const cleanLatent = selectFrames(resolved.run(prompt, seed64), job.policy)
      const poisonedLatent = selectFrames(
        resolved.run(withTrigger(prompt, job.trigger), seed64), job.policy)
      for (const latent of [cleanLatent, poisonedLatent]) {
        if (latent.length !== itemLength) {
          // Abort before any file is written: no partial batches on disk.
          throw new Error(
            `shape inconsistency across prompts: got ${latent.length} values, ` +
            `expected ${itemLength} for ${channels}x${height}x${width}`)
        }
      }
      clean.push(cleanLatent)
      poisoned.push(poisonedLatent)
    }
  }

  const count = clean.length
  const stack = (items: Float32Array[]): Float32Array => {
    const out = new Float32Array(count * itemLength)
    items.forEach((item, index) => out.set(item, index * itemLength))
    return out
  }

  fs.mkdirSync(job.outDir, { recursive: true })
  const shape = [count, channels, height, width]
  writeNpyAtomic(path.join(job.outDir, CLEAN_FILE), shape, stack(clean))
  writeNpyAtomic(path.join(job.outDir, POISONED_FILE), shape, stack(poisoned))

  const manifest: ExtractionManifest = {
    model: job.model,
    prompts: job.prompts,
    trigger: job.trigger,
    seeds: job.seeds.map(s => BigInt(s).toString()),
    policy: job.policy,
    steps: resolved.steps,
    shape: [channels, height, width],
    count,
    deterministic: resolved.deterministic,
    tool: { name: TOOL_NAME, version: TOOL_VERSION }
  }
  const manifestPath = path.join(job.outDir, MANIFEST_FILE)
  const tmp = `${manifestPath}.tmp-${process.pid}`
  fs.writeFileSync(tmp, JSON.stringify(manifest, null, 2) + '\n')
  fs.renameSync(tmp, manifestPath)
  return manifest
}
