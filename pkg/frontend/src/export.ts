/**
 * Export frozen per-image features for a COCO split into an SPMLF file.
 *
 * Row order follows the annotation file's image order. The file is written
 * atomically (temp file, then rename) and only through the SPMLF format
 * contract, so any consumer of that format can read it back bit-exactly.
 */

import { existsSync, readFileSync, renameSync, writeFileSync } from 'node:fs'
import { join } from 'node:path'
import process from 'node:process'

import { loadBackbone, type Backbone } from './backbone.js'
import { readImageOrder, type ImageEntry } from './coco.js'
import { encodeSpmlf, type FeatureTable } from './spmlf.js'

export interface ExportConfig {
  imagesDir: string
  annotations: string
  backbone: string
  out: string
  batchSize?: number
  device?: string
  /** skip unreadable images (reporting them) instead of aborting */
  skipUnreadable?: boolean
}

export interface ExportResult {
  out: string
  rows: number
  dim: number
  skipped: number[]
}

const IMAGE_EXTENSIONS = ['.ppm', '.png', '.jpg', '.jpeg']

function imagePath(dir: string, entry: ImageEntry): string | undefined {
  if (entry.fileName !== undefined) {
    const path = join(dir, entry.fileName)
    return existsSync(path) ? path : undefined
  }
  for (const ext of IMAGE_EXTENSIONS) {
    const path = join(dir, `${entry.id}${ext}`)
    if (existsSync(path)) return path
  }
  return undefined
}

export async function exportFeatures(config: ExportConfig): Promise<ExportResult> {
  const batchSize = config.batchSize ?? 16
  if (!Number.isInteger(batchSize) || batchSize <= 0) {
    throw new Error(`batch size must be a positive integer, got ${config.batchSize}`)
  }
  const entries = readImageOrder(config.annotations)
  const backbone: Backbone = await loadBackbone(config.backbone)

  const kept: ImageEntry[] = []
  const payloads: Buffer[] = []
  const skipped: number[] = []
  for (const entry of entries) {
    const path = imagePath(config.imagesDir, entry)
    if (path === undefined) {
      if (config.skipUnreadable) {
        skipped.push(entry.id)
        process.stderr.write(`skipping unreadable image ${entry.id}\n`)
        continue
      }
      throw new Error(`image ${entry.id} not readable under ${config.imagesDir}`)
    }
    kept.push(entry)
    payloads.push(readFileSync(path))
  }

  const values = new Float32Array(kept.length * backbone.dim)
  for (let start = 0; start < kept.length; start += batchSize) {
    const batch = payloads.slice(start, start + batchSize)
    const vectors = await backbone.embedBatch(batch)
    vectors.forEach((vector, offset) => {
      if (vector.length !== backbone.dim) {
        throw new Error(
          `backbone emitted ${vector.length} values for image ${kept[start + offset].id}, expected ${backbone.dim}`,
        )
      }
      values.set(vector, (start + offset) * backbone.dim)
    })
  }

  const table: FeatureTable = {
    imageIds: kept.map((entry) => BigInt(entry.id)),
    dim: backbone.dim,
    values,
  }
  const tmp = `${config.out}.${process.pid}.tmp`
  writeFileSync(tmp, encodeSpmlf(table))
  renameSync(tmp, config.out)
  return { out: config.out, rows: kept.length, dim: backbone.dim, skipped }
}
