/**
 * SPMLF binary feature container.
 *
 * Layout, all little-endian with no padding or trailing bytes:
 *   8-byte magic "SPMLF1\0\0", u32 N, u32 d,
 *   N u64 image ids, then N*d float32 values row-major.
 */

export const SPMLF_MAGIC = Buffer.from([0x53, 0x50, 0x4d, 0x4c, 0x46, 0x31, 0x00, 0x00])

export interface FeatureTable {
  imageIds: bigint[]
  dim: number
  /** row-major, length imageIds.length * dim */
  values: Float32Array
}

export function encodeSpmlf(table: FeatureTable): Buffer {
  const n = table.imageIds.length
  if (table.values.length !== n * table.dim) {
    throw new Error(`value buffer holds ${table.values.length} floats, expected ${n * table.dim}`)
  }
  const out = Buffer.alloc(16 + 8 * n + 4 * n * table.dim)
  SPMLF_MAGIC.copy(out, 0)
  out.writeUInt32LE(n, 8)
  out.writeUInt32LE(table.dim, 12)
  for (let i = 0; i < n; i++) {
    out.writeBigUInt64LE(table.imageIds[i], 16 + 8 * i)
  }
  const base = 16 + 8 * n
  for (let i = 0; i < table.values.length; i++) {
    out.writeFloatLE(table.values[i], base + 4 * i)
  }
  return out
}

export function decodeSpmlf(data: Buffer): FeatureTable {
  if (data.length < 16 || !data.subarray(0, 8).equals(SPMLF_MAGIC)) {
    throw new Error('bad magic: not an SPMLF file')
  }
  const n = data.readUInt32LE(8)
  const dim = data.readUInt32LE(12)
  const need = 16 + 8 * n + 4 * n * dim
  if (data.length < need) {
    throw new Error(`truncated payload: need ${need} bytes, have ${data.length}`)
  }
  if (data.length > need) {
    throw new Error(`${data.length - need} trailing bytes after payload`)
  }
  const imageIds: bigint[] = []
  for (let i = 0; i < n; i++) {
    imageIds.push(data.readBigUInt64LE(16 + 8 * i))
  }
  const values = new Float32Array(n * dim)
  const base = 16 + 8 * n
  for (let i = 0; i < values.length; i++) {
    values[i] = data.readFloatLE(base + 4 * i)
  }
  return { imageIds, dim, values }
}
