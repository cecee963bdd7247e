/**
 * Export coordinator: image listing and labeling, backbone inference,
 * tensor/manifest/meta output.
 *
 * Images live under the input directory in label subfolders: `normal`
 * (aliases: defect-free, good) and `anomalous` (aliases: defective, bad).
 * The first `monCount` normal images (sorted by filename) become the
 * mon-build pool; the remaining normals and all anomalous images become
 * the evaluation set. Output order, and therefore manifest order, is
 * mon-build, evaluate-normal, evaluate-anomalous.
 */

import { promises as fs } from 'fs'
import * as path from 'path'
import type { Backbone } from './backbone'
import { PREPROCESS_SPEC, loadModelInput } from './preprocess'
import { TensorDims, writeTensorFile } from './tensorFile'

export const NORMAL_DIRS = ['normal', 'defect-free', 'good']
export const ANOMALOUS_DIRS = ['anomalous', 'defective', 'defect', 'bad']

export interface ExportConfig {
  imagesDir: string
  outDir: string
  inputSize: number
  declaredDims: TensorDims
  /** normals in the MoN pool; default: half of the normal images */
  monCount?: number
}

export interface ManifestRow {
  path: string
  label: 'normal' | 'anomalous'
  role: 'mon-build' | 'evaluate'
}

export interface ExportResult {
  manifestCsv: string
  rows: ManifestRow[]
}

interface SourceImage {
  file: string
  label: 'normal' | 'anomalous'
}

export async function listImages(imagesDir: string): Promise<SourceImage[]> {
  const out: SourceImage[] = []
  for (const [label, names] of [
    ['normal', NORMAL_DIRS],
    ['anomalous', ANOMALOUS_DIRS],
  ] as const) {
    for (const dirName of names) {
      const dir = path.join(imagesDir, dirName)
      let entries: string[]
      try {
        entries = await fs.readdir(dir)
      } catch {
        continue
      }
      for (const name of entries.sort()) {
        if (name.toLowerCase().endsWith('.png')) {
          out.push({ file: path.join(dir, name), label })
        }
      }
    }
  }
  if (out.length === 0) {
    throw new Error(
      `no PNG images under ${imagesDir}; expected subfolders ${NORMAL_DIRS[0]}/ and ${ANOMALOUS_DIRS[0]}/`
    )
  }
  return out
}

export async function exportFeatures(config: ExportConfig, backbone: Backbone): Promise<ExportResult> {
  const images = await listImages(config.imagesDir)
  const normals = images.filter((i) => i.label === 'normal')
  const anomalous = images.filter((i) => i.label === 'anomalous')
  const monCount = config.monCount ?? Math.floor(normals.length / 2)
  if (monCount < 1 || monCount > normals.length) {
    throw new Error(`monCount ${monCount} out of range; found ${normals.length} normal images`)
  }

  await fs.mkdir(config.outDir, { recursive: true })
  const rows: ManifestRow[] = []
  const ordered = [
    ...normals.slice(0, monCount).map((i) => ({ ...i, role: 'mon-build' as const })),
    ...normals.slice(monCount).map((i) => ({ ...i, role: 'evaluate' as const })),
    ...anomalous.map((i) => ({ ...i, role: 'evaluate' as const })),
  ]
  for (const source of ordered) {
    const image = await loadModelInput(source.file, config.inputSize)
    const { dims, values } = await backbone.extract(image)
    const name = path.basename(source.file, path.extname(source.file)) + '.mnt'
    await writeTensorFile(path.join(config.outDir, name), dims, values)
    rows.push({ path: name, label: source.label, role: source.role })
  }

  const manifestCsv = path.join(config.outDir, 'manifest.csv')
  const lines = ['path,label,role', ...rows.map((r) => `${r.path},${r.label},${r.role}`)]
  await fs.writeFile(manifestCsv, lines.join('\n') + '\n', 'utf-8')
  await writeMeta(config, backbone, rows.length)
  return { manifestCsv, rows }
}

async function writeMeta(config: ExportConfig, backbone: Backbone, count: number): Promise<void> {
  const d = config.declaredDims
  const lines = [
    `backbone=${backbone.id}`,
    `input_size=${config.inputSize}x${config.inputSize}x3`,
    `output_dims=${d.height}x${d.width}x${d.channels}`,
    `resize=${PREPROCESS_SPEC.resize}`,
    `pixel_range=${PREPROCESS_SPEC.pixel_range}`,
    `grayscale=${PREPROCESS_SPEC.grayscale}`,
    `images=${count}`,
  ]
  await fs.writeFile(path.join(config.outDir, 'export_meta.txt'), lines.join('\n') + '\n', 'utf-8')
}
