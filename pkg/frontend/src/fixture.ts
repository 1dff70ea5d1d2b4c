import * as tf from '@tensorflow/tfjs'
import { CROP_SIZE } from './image.js'
import { FEATURE_DIM, saveModelDir } from './model.js'

/**
 * A small seeded convolutional stand-in for a real pretrained backbone:
 * strided convolutions down to a coarse grid, a 1x1 expansion to 2048
 * channels, then global average pooling. Used by the offline test suite;
 * production runs should point at a converted pretrained model instead.
 */
export function buildFixtureModel(seed = 7): tf.LayersModel {
  const model = tf.sequential()
  model.add(
    tf.layers.conv2d({
      inputShape: [CROP_SIZE, CROP_SIZE, 3],
      filters: 8,
      kernelSize: 7,
      strides: 4,
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed }),
      biasInitializer: 'zeros',
    }),
  )
  model.add(
    tf.layers.conv2d({
      filters: 16,
      kernelSize: 3,
      strides: 4,
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 1 }),
      biasInitializer: 'zeros',
    }),
  )
  model.add(
    tf.layers.conv2d({
      filters: FEATURE_DIM,
      kernelSize: 1,
      activation: 'relu',
      kernelInitializer: tf.initializers.glorotUniform({ seed: seed + 2 }),
      biasInitializer: tf.initializers.constant({ value: 0.01 }),
    }),
  )
  model.add(tf.layers.globalAveragePooling2d({}))
  return model
}

async function main(): Promise<void> {
  const dir = process.argv[2] || 'fixture-model'
  await saveModelDir(buildFixtureModel(), dir)
  console.log(`fixture model written to ${dir}`)
}

if (process.argv[1] && process.argv[1].endsWith('fixture.js')) {
  main().catch(error => {
    console.error(error)
    process.exit(1)
  })
}
