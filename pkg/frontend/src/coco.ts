/** Minimal reading of a COCO-style instances document: image order only. */

import { readFileSync } from 'node:fs'

export interface ImageEntry {
  id: number
  fileName?: string
}

export function readImageOrder(annotationPath: string): ImageEntry[] {
  let doc: unknown
  try {
    doc = JSON.parse(readFileSync(annotationPath, 'utf-8'))
  } catch (err) {
    throw new Error(`${annotationPath}: invalid JSON (${(err as Error).message})`)
  }
  const images = (doc as { images?: unknown }).images
  if (!Array.isArray(images)) {
    throw new Error(`${annotationPath}: missing images array`)
  }
  return images.map((entry, i) => {
    const rec = entry as { id?: unknown; file_name?: unknown }
    if (typeof rec.id !== 'number' || !Number.isInteger(rec.id) || rec.id < 0) {
      throw new Error(`${annotationPath}: images[${i}].id missing or invalid`)
    }
    return {
      id: rec.id,
      fileName: typeof rec.file_name === 'string' ? rec.file_name : undefined,
    }
  })
}
