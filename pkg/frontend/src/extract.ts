import * as tf from '@tensorflow/tfjs'
import { FeatureRecord } from './feat.js'
import { loadImageFile, preprocess } from './image.js'
import { ManifestEntry } from './manifest.js'
import { FEATURE_DIM, validateFeatureModel } from './model.js'

export type ErrorPolicy = 'abort' | 'skip'

export interface ExtractResult {
  dim: number
  records: FeatureRecord[]
  /** manifest entries skipped under the skip policy, with reasons */
  skipped: { entry: ManifestEntry; reason: string }[]
}

/**
 * Run every manifest image through the model's pooled output, in manifest
 * order. Undecodable or missing images either abort the run or are skipped
 * with a warning, per the policy.
 */
export async function extractFeatures(
  model: tf.LayersModel,
  entries: ManifestEntry[],
  onError: ErrorPolicy = 'abort',
): Promise<ExtractResult> {
  validateFeatureModel(model)
  const records: FeatureRecord[] = []
  const skipped: ExtractResult['skipped'] = []
  for (const entry of entries) {
    let input: tf.Tensor3D
    try {
      input = preprocess(loadImageFile(entry.path))
    } catch (error) {
      const reason = error instanceof Error ? error.message : String(error)
      if (onError === 'abort') {
        throw new Error(`${entry.path}: ${reason}`)
      }
      skipped.push({ entry, reason })
      continue
    }
    const vector = tf.tidy(() => {
      const batched = input.expandDims(0)
      const output = model.predict(batched) as tf.Tensor
      return output.reshape([FEATURE_DIM])
    })
    const data = (await vector.data()) as Float32Array
    input.dispose()
    vector.dispose()
    records.push({
      objectClass: entry.objectClass,
      instanceId: entry.instanceId,
      vector: Float32Array.from(data),
    })
  }
  return { dim: FEATURE_DIM, records, skipped }
}
