import { mkdtempSync, writeFileSync } from 'fs'
import { tmpdir } from 'os'
import * as path from 'path'
import * as tf from '@tensorflow/tfjs'
import { describe, expect, it } from 'vitest'
import { TfjsBackbone } from '../src/backbone'
import type { RgbImage } from '../src/preprocess'

// A tiny stand-in with the real extraction contract: 224x224x3 input,
// stage-7-style named layer producing 14x14x192.
async function saveTinyModel(dir: string): Promise<string> {
  const model = tf.sequential({
    layers: [
      tf.layers.averagePooling2d({ poolSize: 16, strides: 16, inputShape: [224, 224, 3] }),
      tf.layers.conv2d({ filters: 192, kernelSize: 1, name: 'block7a_project' }),
    ],
  })
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      const weightData = artifacts.weightData
      const blob = Array.isArray(weightData)
        ? Buffer.concat(weightData.map((b) => Buffer.from(b)))
        : Buffer.from(weightData as ArrayBuffer)
      const modelJson = {
        modelTopology: artifacts.modelTopology,
        format: 'layers-model',
        generatedBy: 'test',
        convertedBy: null,
        weightsManifest: [{ paths: ['weights.bin'], weights: artifacts.weightSpecs }],
      }
      writeFileSync(path.join(dir, 'model.json'), JSON.stringify(modelJson))
      writeFileSync(path.join(dir, 'weights.bin'), blob)
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' as const } }
    })
  )
  model.dispose()
  return path.join(dir, 'model.json')
}

function rampImage(): RgbImage {
  const values = new Float32Array(224 * 224 * 3)
  for (let y = 0; y < 224; y++) {
    for (let x = 0; x < 224; x++) {
      for (let c = 0; c < 3; c++) {
        values[(y * 224 + x) * 3 + c] = ((x + y + c * 31) % 256)
      }
    }
  }
  return { height: 224, width: 224, values }
}

describe('tfjs backbone', () => {
  it('loads a local layers model, slices the stage layer, checks dims', async () => {
    const dir = mkdtempSync(path.join(tmpdir(), 'tfjs-'))
    const modelJson = await saveTinyModel(dir)
    const backbone = await TfjsBackbone.load({
      modelJsonPath: modelJson,
      declared: { height: 14, width: 14, channels: 192 },
      inputSize: 224,
      stage: 7, // resolved via the block7* naming heuristic
    })
    try {
      const { dims, values } = await backbone.extract(rampImage())
      expect(dims).toEqual({ height: 14, width: 14, channels: 192 })
      expect(values.length).toBe(14 * 14 * 192)
      expect(Array.from(values).every(Number.isFinite)).toBe(true)
      // deterministic given fixed weights and preprocessing
      const again = await backbone.extract(rampImage())
      expect(Array.from(again.values)).toEqual(Array.from(values))
    } finally {
      backbone.close()
    }
  }, 60000)

  it('raises a dims mismatch when the declaration disagrees with the model', async () => {
    const dir = mkdtempSync(path.join(tmpdir(), 'tfjs-'))
    const modelJson = await saveTinyModel(dir)
    const backbone = await TfjsBackbone.load({
      modelJsonPath: modelJson,
      declared: { height: 7, width: 7, channels: 192 },
      inputSize: 224,
      layer: 'block7a_project',
    })
    try {
      await expect(backbone.extract(rampImage())).rejects.toThrow(/declared 7x7x192/)
    } finally {
      backbone.close()
    }
  }, 60000)

  it('names the available layers when the stage heuristic finds nothing', async () => {
    const dir = mkdtempSync(path.join(tmpdir(), 'tfjs-'))
    const modelJson = await saveTinyModel(dir)
    await expect(
      TfjsBackbone.load({
        modelJsonPath: modelJson,
        declared: { height: 14, width: 14, channels: 192 },
        inputSize: 224,
        stage: 3,
      })
    ).rejects.toThrow(/block3/)
  }, 60000)
})
