/**
 * Frozen feature backbones.
 *
 * A backbone maps a batch of raw image files to fixed-length float vectors.
 * Two kinds are built in:
 *
 *   stub:<dim>[:fill]  constant vectors, for wiring tests and format checks
 *   tfjs:<model-dir>   a TensorFlow.js graph model (loaded read-only); the
 *                      model output is globally average-pooled when it still
 *                      has spatial axes. Images must be binary PPM (P6),
 *                      which needs no native decoders.
 */

export interface Backbone {
  readonly name: string
  readonly dim: number
  embedBatch(images: Buffer[]): Promise<Float32Array[]>
}

class StubBackbone implements Backbone {
  readonly name: string
  readonly dim: number
  private readonly fill: number

  constructor(dim: number, fill = 1.0) {
    if (!Number.isInteger(dim) || dim <= 0) {
      throw new Error(`stub backbone needs a positive dimension, got ${dim}`)
    }
    this.name = `stub:${dim}:${fill}`
    this.dim = dim
    this.fill = fill
  }

  async embedBatch(images: Buffer[]): Promise<Float32Array[]> {
    return images.map(() => new Float32Array(this.dim).fill(this.fill))
  }
}

export interface PpmImage {
  width: number
  height: number
  /** RGB, row-major, 0..255 */
  pixels: Uint8Array
}

export function decodePpm(data: Buffer): PpmImage {
  if (data.subarray(0, 2).toString('ascii') !== 'P6') {
    throw new Error('not a binary PPM (P6) image')
  }
  // header: P6 <width> <height> <maxval>, tokens separated by whitespace,
  // '#' comments allowed, one whitespace byte after maxval
  let pos = 2
  const tokens: number[] = []
  while (tokens.length < 3) {
    while (pos < data.length && /\s/.test(String.fromCharCode(data[pos]))) pos++
    if (data[pos] === 0x23) {
      while (pos < data.length && data[pos] !== 0x0a) pos++
      continue
    }
    let start = pos
    while (pos < data.length && !/\s/.test(String.fromCharCode(data[pos]))) pos++
    tokens.push(Number(data.subarray(start, pos).toString('ascii')))
  }
  pos++
  const [width, height, maxval] = tokens
  if (!(width > 0 && height > 0) || maxval !== 255) {
    throw new Error(`unsupported PPM header ${width}x${height} maxval ${maxval}`)
  }
  const pixels = data.subarray(pos, pos + width * height * 3)
  if (pixels.length !== width * height * 3) {
    throw new Error('truncated PPM payload')
  }
  return { width, height, pixels: new Uint8Array(pixels) }
}

class TfjsBackbone implements Backbone {
  readonly name: string
  readonly dim: number
  private readonly tf: typeof import('@tensorflow/tfjs')
  private readonly model: import('@tensorflow/tfjs').GraphModel

  private constructor(
    name: string,
    dim: number,
    tf: typeof import('@tensorflow/tfjs'),
    model: import('@tensorflow/tfjs').GraphModel,
  ) {
    this.name = name
    this.dim = dim
    this.tf = tf
    this.model = model
  }

  static async load(modelDir: string): Promise<TfjsBackbone> {
    let tf: typeof import('@tensorflow/tfjs')
    try {
      tf = await import('@tensorflow/tfjs')
    } catch {
      throw new Error(
        'the tfjs backbone needs @tensorflow/tfjs installed (npm install @tensorflow/tfjs)',
      )
    }
    const model = await tf.loadGraphModel(`file://${modelDir}/model.json`)
    const probeDim = await probeOutputDim(tf, model)
    return new TfjsBackbone(`tfjs:${modelDir}`, probeDim, tf, model)
  }

  async embedBatch(images: Buffer[]): Promise<Float32Array[]> {
    const tf = this.tf
    const out: Float32Array[] = []
    for (const raw of images) {
      const img = decodePpm(raw)
      const vector = tf.tidy(() => {
        const input = tf
          .tensor3d(img.pixels, [img.height, img.width, 3], 'int32')
          .toFloat()
          .div(255)
          .expandDims(0)
        let result = this.model.predict(input) as import('@tensorflow/tfjs').Tensor
        while (result.rank > 2) {
          result = result.mean(1)
        }
        return result.squeeze()
      })
      out.push(new Float32Array(await vector.data()))
      vector.dispose()
    }
    return out
  }
}

async function probeOutputDim(
  tf: typeof import('@tensorflow/tfjs'),
  model: import('@tensorflow/tfjs').GraphModel,
): Promise<number> {
  const probe = tf.tidy(() => {
    const input = tf.zeros([1, 224, 224, 3])
    let result = model.predict(input) as import('@tensorflow/tfjs').Tensor
    while (result.rank > 2) {
      result = result.mean(1)
    }
    return result.squeeze()
  })
  const dim = probe.size
  probe.dispose()
  return dim
}

export async function loadBackbone(spec: string): Promise<Backbone> {
  const [kind, ...rest] = spec.split(':')
  if (kind === 'stub') {
    const dim = Number(rest[0] ?? '8')
    const fill = rest.length > 1 ? Number(rest[1]) : 1.0
    return new StubBackbone(dim, fill)
  }
  if (kind === 'tfjs') {
    if (!rest.length) throw new Error('tfjs backbone needs a model directory: tfjs:<dir>')
    return TfjsBackbone.load(rest.join(':'))
  }
  throw new Error(`unknown backbone ${spec} (expected stub:<dim> or tfjs:<model-dir>)`)
}
