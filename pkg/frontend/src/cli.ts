/**
 * Command-line front end for latent extraction.
 *
 * Example:
 *   latent-extract --model "synthetic:4x16x16?trigger=sks" --trigger sks \
 *     --prompt "a castle on a hill" --prompt "a starry night sky" \
 *     --seeds 0,1,2,3 --policy final --out exported/
 *
 * Exit codes: 0 success, 1 usage/validation error, 2 I/O or model error.
 */

import * as fs from 'node:fs'

import { extract, ExtractionJob, TimestepPolicy } from './extract.js'

interface ParsedArgs {
  model?: string
  out?: string
  trigger?: string
  prompts: string[]
  promptsFile?: string
  seeds?: string
  seedBase?: string
  seedCount?: string
  policy: string
  k?: string
}

function parseArgs (argv: string[]): ParsedArgs {
  const parsed: ParsedArgs = { prompts: [], policy: 'final' }
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i]
    const next = (): string => {
      i += 1
      if (i >= argv.length) {
        throw new UsageError(`missing value for ${flag}`)
      }
      return argv[i]
    }
    switch (flag) {
      case '--model': parsed.model = next(); break
      case '--out': parsed.out = next(); break
      case '--trigger': parsed.trigger = next(); break
      case '--prompt': parsed.prompts.push(next()); break
      case '--prompts-file': parsed.promptsFile = next(); break
      case '--seeds': parsed.seeds = next(); break
      case '--seed-base': parsed.seedBase = next(); break
      case '--seed-count': parsed.seedCount = next(); break
      case '--policy': parsed.policy = next(); break
      case '--k': parsed.k = next(); break
      case '--help':
      case '-h':
        printUsage()
        process.exit(0)
        break
      default:
        throw new UsageError(`unknown flag ${flag}`)
    }
  }
  return parsed
}

class UsageError extends Error {}

function printUsage (): void {
  console.log(
    'usage: latent-extract --model ID --trigger TOKEN --out DIR\n' +
    '                      (--prompt TEXT ... | --prompts-file FILE)\n' +
    '                      (--seeds 0,1,2 | --seed-base N --seed-count N)\n' +
    '                      [--policy final|mean-last-k] [--k N]')
}

function buildJob (parsed: ParsedArgs): ExtractionJob {
  if (parsed.model === undefined) throw new UsageError('--model is required')
  if (parsed.out === undefined) throw new UsageError('--out is required')
  if (parsed.trigger === undefined) throw new UsageError('--trigger is required')

  let prompts = parsed.prompts
  if (parsed.promptsFile !== undefined) {
    const lines = fs.readFileSync(parsed.promptsFile, 'utf8').split('\n')
    prompts = prompts.concat(lines.map(l => l.trim()).filter(l => l.length > 0))
  }
  if (prompts.length === 0) {
    throw new UsageError('no prompts given (--prompt or --prompts-file)')
  }

  let seeds: bigint[]
  if (parsed.seeds !== undefined) {
    seeds = parsed.seeds.split(',').map(s => BigInt(s.trim()))
  } else if (parsed.seedBase !== undefined && parsed.seedCount !== undefined) {
    const base = BigInt(parsed.seedBase)
    const count = Number(parsed.seedCount)
    if (!Number.isInteger(count) || count < 1) {
      throw new UsageError('--seed-count must be a positive integer')
    }
    seeds = Array.from({ length: count }, (_, i) => base + BigInt(i))
  } else {
    throw new UsageError('seeds required (--seeds or --seed-base/--seed-count)')
  }

  let policy: TimestepPolicy
  if (parsed.policy === 'final') {
    policy = { kind: 'final' }
  } else if (parsed.policy === 'mean-last-k') {
    policy = { kind: 'mean_last_k', k: Number(parsed.k ?? '0') }
    if (!Number.isInteger(policy.k) || policy.k < 1) {
      throw new UsageError('--policy mean-last-k requires --k N (positive integer)')
    }
  } else {
    throw new UsageError(`unknown policy ${parsed.policy}`)
  }

  return { model: parsed.model, prompts, trigger: parsed.trigger, seeds, policy, outDir: parsed.out }
}

export function main (argv: string[]): number {
  try {
    const job = buildJob(parseArgs(argv))
    const manifest = extract(job)
    console.log(
      `extracted ${manifest.count} clean/poisoned pairs ` +
      `(${manifest.shape.join('x')}, ${manifest.steps} steps, policy ${manifest.policy.kind}) ` +
      `-> ${job.outDir}`)
    return 0
  } catch (error) {
    if (error instanceof UsageError) {
      console.error(`latent-extract: ${error.message}`)
      printUsage()
      return 1
    }
    const message = error instanceof Error ? error.message : String(error)
    if (message.includes('empty') || message.includes('shape inconsistency') ||
        message.includes('policy')) {
      console.error(`latent-extract: ${message}`)
      return 1
    }
    console.error(`latent-extract: ${message}`)
    return 2
  }
}

const invokedDirectly = process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href

if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)))
}
