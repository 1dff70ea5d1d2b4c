import { writeFileSync } from 'fs'
import { encodeFeat } from './feat.js'
import { extractFeatures, ErrorPolicy } from './extract.js'
import { loadManifest } from './manifest.js'
import { loadModelDir } from './model.js'

const USAGE = `usage: feature-extract --manifest CSV --model DIR --out FEAT [--on-error abort|skip]

Reads an image manifest (object_class,instance_id,path per line), runs each
image through the pooled output of a locally stored tfjs-layers model, and
writes a FEAT feature store. Exit codes: 0 ok, 1 usage, 2 data error.`

interface Args {
  manifest: string
  model: string
  out: string
  onError: ErrorPolicy
}

function parseArgs(argv: string[]): Args {
  const values: Record<string, string> = {}
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i]
    const value = argv[i + 1]
    if (flag === '--help' || flag === '-h') {
      console.log(USAGE)
      process.exit(0)
    }
    if (!flag.startsWith('--') || value === undefined) {
      throw new UsageError(`bad argument ${flag}`)
    }
    values[flag.slice(2)] = value
  }
  for (const required of ['manifest', 'model', 'out']) {
    if (!values[required]) throw new UsageError(`--${required} is required`)
  }
  const onError = values['on-error'] ?? 'abort'
  if (onError !== 'abort' && onError !== 'skip') {
    throw new UsageError(`--on-error must be abort or skip, got ${onError}`)
  }
  return {
    manifest: values.manifest,
    model: values.model,
    out: values.out,
    onError,
  }
}

class UsageError extends Error {}

export async function main(argv: string[]): Promise<number> {
  let args: Args
  try {
    args = parseArgs(argv)
  } catch (error) {
    console.error(USAGE)
    console.error(`error_code: usage: ${(error as Error).message}`)
    return 1
  }
  try {
    const entries = loadManifest(args.manifest)
    const model = await loadModelDir(args.model)
    const result = await extractFeatures(model, entries, args.onError)
    for (const { entry, reason } of result.skipped) {
      console.error(`warning: skipped ${entry.path}: ${reason}`)
    }
    writeFileSync(args.out, encodeFeat(result.dim, result.records))
    console.log(
      `extracted ${result.records.length} features (dim ${result.dim}) -> ${args.out}`,
    )
    return 0
  } catch (error) {
    console.error(`error_code: data: ${(error as Error).message}`)
    return 2
  }
}

if (process.argv[1] && process.argv[1].endsWith('cli.js')) {
  main(process.argv.slice(2)).then(code => {
    process.exitCode = code
  })
}
