import { existsSync, mkdirSync, readFileSync, writeFileSync } from 'fs'
import { join } from 'path'
import * as tf from '@tensorflow/tfjs'

export const FEATURE_DIM = 2048

/**
 * Load a tfjs-layers model from a local directory holding model.json and
 * its weight shards (the layout produced by `tensorflowjs_converter` or by
 * saveModelDir below). There is no network fallback: weights must already
 * be on disk.
 */
export async function loadModelDir(dir: string): Promise<tf.LayersModel> {
  const manifestPath = join(dir, 'model.json')
  if (!existsSync(manifestPath)) {
    throw new Error(
      `no model.json in ${dir}; pretrained weights must be available locally`,
    )
  }
  const manifest = JSON.parse(readFileSync(manifestPath, 'utf-8'))
  if (!manifest.modelTopology || !manifest.weightsManifest) {
    throw new Error(`${manifestPath} is not a tfjs layers model manifest`)
  }
  const weightSpecs: tf.io.WeightsManifestEntry[] = []
  const shards: Buffer[] = []
  for (const group of manifest.weightsManifest) {
    weightSpecs.push(...group.weights)
    for (const path of group.paths) {
      shards.push(readFileSync(join(dir, path)))
    }
  }
  const weightData = new Uint8Array(Buffer.concat(shards)).buffer
  return tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: manifest.modelTopology,
      weightSpecs,
      weightData,
    }),
  )
}

export async function saveModelDir(model: tf.LayersModel, dir: string): Promise<void> {
  mkdirSync(dir, { recursive: true })
  await model.save(
    tf.io.withSaveHandler(async artifacts => {
      const weightData = artifacts.weightData as ArrayBuffer
      writeFileSync(join(dir, 'weights.bin'), Buffer.from(weightData))
      writeFileSync(
        join(dir, 'model.json'),
        JSON.stringify(
          {
            modelTopology: artifacts.modelTopology,
            format: 'layers-model',
            generatedBy: 'verbground-feature-extract',
            weightsManifest: [
              { paths: ['weights.bin'], weights: artifacts.weightSpecs },
            ],
          },
          null,
          1,
        ),
      )
      return {
        modelArtifactsInfo: {
          dateSaved: new Date(),
          modelTopologyType: 'JSON' as const,
        },
      }
    }),
  )
}

/** The model must map [n, 224, 224, 3] images to pooled [n, 2048] features. */
export function validateFeatureModel(model: tf.LayersModel): void {
  const shape = model.outputs[0].shape
  if (shape.length !== 2 || shape[1] !== FEATURE_DIM) {
    throw new Error(
      `model output shape ${JSON.stringify(shape)} is not [batch, ${FEATURE_DIM}]; ` +
        'export the global-average-pool layer of the backbone',
    )
  }
}
