#!/usr/bin/env node
/**
 * feature-export: run a backbone over labeled images and write .mnt
 * tensors plus a manifest the scoring toolkit consumes directly.
 */

import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'
import { Backbone, StubBackbone, TfjsBackbone } from './backbone'
import { exportFeatures } from './exporter'
import type { TensorDims } from './tensorFile'

function parseDims(raw: string): TensorDims {
  const parts = raw.split('x').map((p) => Number.parseInt(p, 10))
  if (parts.length !== 3 || parts.some((p) => !Number.isInteger(p) || p < 1)) {
    throw new Error(`--dims must look like 14x14x192, got ${raw}`)
  }
  return { height: parts[0], width: parts[1], channels: parts[2] }
}

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .scriptName('feature-export')
    .option('images', { type: 'string', demandOption: true, describe: 'directory with normal/ and anomalous/ image folders' })
    .option('out', { type: 'string', demandOption: true, describe: 'output directory for tensors + manifest' })
    .option('backbone', { type: 'string', default: 'efficientnet-b4', describe: 'backbone id, or "stub" for the deterministic stand-in' })
    .option('model', { type: 'string', describe: 'path to a tfjs model.json (required unless --backbone stub)' })
    .option('stage', { type: 'number', default: 7, describe: 'stage whose activation is exported (layers models)' })
    .option('layer', { type: 'string', describe: 'explicit layer name; overrides --stage' })
    .option('output-node', { type: 'string', describe: 'output node name (graph models)' })
    .option('size', { type: 'number', default: 224, describe: 'square input size fed to the backbone' })
    .option('dims', { type: 'string', default: '14x14x192', describe: 'declared output dims, checked against the model' })
    .option('mon-count', { type: 'number', describe: 'normals in the MoN pool (default: half of them)' })
    .strict()
    .help()
    .parse()

  const declared = parseDims(args.dims)
  let backbone: Backbone
  if (args.backbone === 'stub') {
    backbone = new StubBackbone(declared)
  } else {
    if (!args.model) {
      throw new Error(
        `--backbone ${args.backbone} needs --model pointing at a tfjs conversion of the ` +
          'pretrained network (e.g. `tensorflowjs_converter --input_format=keras ...`)'
      )
    }
    backbone = await TfjsBackbone.load({
      modelJsonPath: args.model,
      declared,
      inputSize: args.size,
      stage: args.stage,
      layer: args.layer,
      outputNode: args['output-node'],
      backboneId: args.backbone,
    })
  }

  try {
    const result = await exportFeatures(
      {
        imagesDir: args.images,
        outDir: args.out,
        inputSize: args.size,
        declaredDims: declared,
        monCount: args['mon-count'],
      },
      backbone
    )
    const monBuild = result.rows.filter((r) => r.role === 'mon-build').length
    console.log(`exported ${result.rows.length} tensors (${monBuild} mon-build) -> ${result.manifestCsv}`)
    return 0
  } finally {
    backbone.close()
  }
}

if (require.main === module) {
  main(hideBin(process.argv)).then(
    (code) => process.exit(code),
    (err) => {
      console.error(`error: ${err instanceof Error ? err.message : err}`)
      process.exit(1)
    }
  )
}
