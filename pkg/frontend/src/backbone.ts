/**
 * Feature-extracting backbones.
 *
 * The real path loads a TensorFlow.js model from disk (a pretrained
 * network converted with `tensorflowjs_converter`) and takes the
 * activation of a chosen stage. The stub path is a deterministic
 * patch-pooling map with the same output contract, for dry runs and
 * offline tests.
 */

import { promises as fs } from 'fs'
import * as path from 'path'
import type { RgbImage } from './preprocess'
import type { TensorDims } from './tensorFile'

export interface Backbone {
  readonly id: string
  /** maps a size x size x 3 image to a feature tensor, row-major (h, w, c) */
  extract(image: RgbImage): Promise<{ dims: TensorDims; values: Float32Array }>
  close(): void
}

export class DimsMismatchError extends Error {}

function checkDeclared(actual: TensorDims, declared: TensorDims, id: string): void {
  if (
    actual.height !== declared.height ||
    actual.width !== declared.width ||
    actual.channels !== declared.channels
  ) {
    throw new DimsMismatchError(
      `${id} produced ${actual.height}x${actual.width}x${actual.channels}, ` +
        `declared ${declared.height}x${declared.width}x${declared.channels}`
    )
  }
}

/**
 * Deterministic stand-in: averages square input patches per RGB channel,
 * then fans the three pooled planes out to the declared channel count with
 * fixed per-channel gains. Identical images give identical tensors.
 */
export class StubBackbone implements Backbone {
  readonly id = 'stub'

  constructor(private declared: TensorDims) {}

  async extract(image: RgbImage): Promise<{ dims: TensorDims; values: Float32Array }> {
    const { height: outH, width: outW, channels: outC } = this.declared
    if (image.height % outH !== 0 || image.width % outW !== 0) {
      throw new DimsMismatchError(
        `stub backbone needs the input size (${image.height}x${image.width}) to be a ` +
          `multiple of the output grid (${outH}x${outW})`
      )
    }
    const patchH = image.height / outH
    const patchW = image.width / outW
    const pooled = new Float32Array(outH * outW * 3)
    for (let y = 0; y < outH; y++) {
      for (let x = 0; x < outW; x++) {
        for (let c = 0; c < 3; c++) {
          let acc = 0
          for (let dy = 0; dy < patchH; dy++) {
            for (let dx = 0; dx < patchW; dx++) {
              acc += image.values[((y * patchH + dy) * image.width + (x * patchW + dx)) * 3 + c]
            }
          }
          pooled[(y * outW + x) * 3 + c] = acc / (patchH * patchW)
        }
      }
    }
    const values = new Float32Array(outH * outW * outC)
    for (let i = 0; i < outH * outW; i++) {
      for (let k = 0; k < outC; k++) {
        values[i * outC + k] = pooled[i * 3 + (k % 3)] * (1 + (k % 7) * 0.125)
      }
    }
    return { dims: { ...this.declared }, values }
  }

  close(): void {}
}

export interface TfjsBackboneOptions {
  modelJsonPath: string
  declared: TensorDims
  inputSize: number
  /** stage number used to pick the layer (layers models, keras naming) */
  stage?: number
  /** explicit layer name (layers models); overrides stage */
  layer?: string
  /** output node name (graph models) */
  outputNode?: string
  backboneId?: string
}

type Tfjs = typeof import('@tensorflow/tfjs')

export class TfjsBackbone implements Backbone {
  readonly id: string

  private constructor(
    id: string,
    private tf: Tfjs,
    private run: (input: unknown) => unknown,
    private declared: TensorDims,
    private dispose: () => void
  ) {
    this.id = id
  }

  static async load(options: TfjsBackboneOptions): Promise<TfjsBackbone> {
    const tf: Tfjs = await import('@tensorflow/tfjs')
    const artifacts = await loadModelArtifacts(options.modelJsonPath)
    const id = options.backboneId ?? 'efficientnet-b4'

    if (artifacts.format === 'graph-model') {
      const model = await tf.loadGraphModel(tf.io.fromMemory(artifacts))
      const node = options.outputNode
      const run = (input: unknown) =>
        node ? model.execute(input as never, node) : model.predict(input as never)
      return new TfjsBackbone(id, tf, run, options.declared, () => model.dispose())
    }

    const model = await tf.loadLayersModel(tf.io.fromMemory(artifacts))
    const layerName = options.layer ?? stageLayerName(model, options.stage ?? 7)
    const sliced = tf.model({
      inputs: model.inputs,
      outputs: model.getLayer(layerName).output,
    })
    return new TfjsBackbone(
      id,
      tf,
      (input: unknown) => sliced.predict(input as never),
      options.declared,
      () => model.dispose()
    )
  }

  async extract(image: RgbImage): Promise<{ dims: TensorDims; values: Float32Array }> {
    const tf = this.tf
    const output = tf.tidy(() => {
      const input = tf.tensor4d(image.values, [1, image.height, image.width, 3])
      const raw = this.run(input) as InstanceType<typeof tf.Tensor>
      return raw.squeeze([0])
    })
    try {
      const [h, w, c] = output.shape as number[]
      const actual = { height: h, width: w, channels: c }
      checkDeclared(actual, this.declared, this.id)
      const values = (await output.data()) as Float32Array
      return { dims: actual, values: Float32Array.from(values) }
    } finally {
      output.dispose()
    }
  }

  close(): void {
    this.dispose()
  }
}

/** Last layer of the keras-style `block{stage}...` group. */
function stageLayerName(model: { layers: Array<{ name: string }> }, stage: number): string {
  const prefix = `block${stage}`
  const matches = model.layers.filter((l) => l.name.startsWith(prefix))
  if (matches.length === 0) {
    const available = model.layers.map((l) => l.name).slice(0, 12).join(', ')
    throw new Error(
      `no layers named ${prefix}* in the model; pass --layer explicitly (layers start: ${available}, ...)`
    )
  }
  return matches[matches.length - 1].name
}

/**
 * Read a tfjs model.json and its weight shards from the local filesystem.
 * (The pure-JS tfjs build has no file:// handler; this replaces it.)
 */
export async function loadModelArtifacts(modelJsonPath: string) {
  const tf: Tfjs = await import('@tensorflow/tfjs')
  const dir = path.dirname(modelJsonPath)
  const modelJson = JSON.parse(await fs.readFile(modelJsonPath, 'utf-8'))
  return tf.io.getModelArtifactsForJSON(modelJson, async (manifest) => {
    const specs = []
    const shards: Buffer[] = []
    for (const group of manifest) {
      specs.push(...group.weights)
      for (const shard of group.paths) {
        shards.push(await fs.readFile(path.join(dir, shard)))
      }
    }
    const blob = Buffer.concat(shards)
    const data = blob.buffer.slice(blob.byteOffset, blob.byteOffset + blob.byteLength)
    return [specs, data]
  })
}
