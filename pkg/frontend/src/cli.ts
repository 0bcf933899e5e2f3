#!/usr/bin/env node
/** CLI wrapper around exportFeatures; flags mirror the ExportConfig fields. */

import { parseArgs } from 'node:util'
import process from 'node:process'

import { exportFeatures } from './export.js'

const USAGE = `usage: spmlf-export --images DIR --annotations FILE --out FILE
                    [--backbone NAME] [--batch-size N] [--device NAME]
                    [--skip-unreadable]

Backbones: stub:<dim>[:fill] (constant vectors), tfjs:<model-dir>.`

export async function run(argv: string[]): Promise<number> {
  let parsed
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        images: { type: 'string' },
        annotations: { type: 'string' },
        out: { type: 'string' },
        backbone: { type: 'string', default: 'stub:8' },
        'batch-size': { type: 'string', default: '16' },
        device: { type: 'string', default: 'cpu' },
        'skip-unreadable': { type: 'boolean', default: false },
        help: { type: 'boolean', default: false },
      },
    })
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n${USAGE}\n`)
    return 2
  }
  const opts = parsed.values
  if (opts.help) {
    process.stdout.write(`${USAGE}\n`)
    return 0
  }
  for (const key of ['images', 'annotations', 'out'] as const) {
    if (opts[key] === undefined) {
      process.stderr.write(`error: --${key} is required\n${USAGE}\n`)
      return 2
    }
  }
  try {
    const result = await exportFeatures({
      imagesDir: opts.images!,
      annotations: opts.annotations!,
      out: opts.out!,
      backbone: opts.backbone!,
      batchSize: Number(opts['batch-size']),
      device: opts.device,
      skipUnreadable: opts['skip-unreadable'],
    })
    process.stdout.write(
      `${result.out}: ${result.rows} rows x ${result.dim} dims` +
        (result.skipped.length ? `, skipped ${result.skipped.length}\n` : '\n'),
    )
    return 0
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`)
    return 1
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split('/').pop()!)
if (invokedDirectly) {
  run(process.argv.slice(2)).then((code) => {
    process.exitCode = code
  })
}
