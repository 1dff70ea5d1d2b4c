import assert from 'node:assert/strict'
import { before, test } from 'node:test'
import { mkdtempSync, readFileSync, writeFileSync } from 'fs'
import { tmpdir } from 'os'
import { join } from 'path'
import * as tf from '@tensorflow/tfjs'
import { main as cliMain } from '../src/cli.js'
import { extractFeatures } from '../src/extract.js'
import { cosine, decodeFeat, FEAT_MAGIC } from '../src/feat.js'
import { buildFixtureModel } from '../src/fixture.js'
import { parseManifest } from '../src/manifest.js'
import { loadModelDir, saveModelDir } from '../src/model.js'
import { syntheticPng } from './image.test.js'

let workDir: string
let modelDir: string
let model: tf.LayersModel
let manifestPath: string

// two instances of a "striped" class and one very different "gradient" class
function stripesA(x: number, y: number): [number, number, number] {
  const on = Math.floor(x / 16) % 2 === 0
  return on ? [220, 40, 40] : [30, 10, 10]
}

function stripesANoisy(x: number, y: number): [number, number, number] {
  const [r, g, b] = stripesA(x, y)
  const jitter = ((x * 31 + y * 17) % 13) - 6
  const clamp = (v: number) => Math.max(0, Math.min(255, v + jitter))
  return [clamp(r), clamp(g), clamp(b)]
}

function gradientB(x: number, y: number): [number, number, number] {
  return [10, Math.floor((y / 280) * 255), 220]
}

before(async () => {
  workDir = mkdtempSync(join(tmpdir(), 'feature-extract-'))
  modelDir = join(workDir, 'model')
  await saveModelDir(buildFixtureModel(7), modelDir)
  model = await loadModelDir(modelDir)
  writeFileSync(join(workDir, 'a0.png'), syntheticPng(280, 280, stripesA))
  writeFileSync(join(workDir, 'a1.png'), syntheticPng(280, 280, stripesANoisy))
  writeFileSync(join(workDir, 'b0.png'), syntheticPng(280, 280, gradientB))
  manifestPath = join(workDir, 'manifest.csv')
  writeFileSync(
    manifestPath,
    'object_class,instance_id,path\n' +
      `stripes,0,${join(workDir, 'a0.png')}\n` +
      `stripes,1,${join(workDir, 'a1.png')}\n` +
      `gradient,0,${join(workDir, 'b0.png')}\n`,
  )
})

test('smoke set: valid FEAT, deterministic, within-class beats cross-class', async () => {
  const entries = parseManifest(readFileSync(manifestPath, 'utf-8'))
  const first = await extractFeatures(model, entries)
  assert.equal(first.dim, 2048)
  assert.equal(first.records.length, 3)
  for (const record of first.records) {
    let norm = 0
    for (const value of record.vector) {
      assert.ok(Number.isFinite(value))
      norm += value * value
    }
    assert.ok(norm > 0, `zero-norm feature for ${record.objectClass}`)
  }
  // record order follows the manifest
  assert.deepEqual(
    first.records.map(r => `${r.objectClass}/${r.instanceId}`),
    ['stripes/0', 'stripes/1', 'gradient/0'],
  )

  const second = await extractFeatures(model, entries)
  for (let i = 0; i < first.records.length; i++) {
    assert.deepEqual(
      [...second.records[i].vector],
      [...first.records[i].vector],
      'repeat extraction must be bit-identical',
    )
  }

  const [a0, a1, b0] = first.records.map(r => r.vector)
  const within = cosine(a0, a1)
  const cross = Math.max(cosine(a0, b0), cosine(a1, b0))
  assert.ok(
    within > cross,
    `within-class ${within.toFixed(4)} must exceed cross-class ${cross.toFixed(4)}`,
  )
})

test('empty manifest produces a valid zero-record store', async () => {
  const result = await extractFeatures(model, [])
  assert.equal(result.dim, 2048)
  assert.equal(result.records.length, 0)
})

test('missing image aborts by default and skips under the flag', async () => {
  const entries = parseManifest(`ghost,0,${join(workDir, 'missing.png')}\n`)
  await assert.rejects(() => extractFeatures(model, entries), /missing\.png/)
  const skipped = await extractFeatures(model, entries, 'skip')
  assert.equal(skipped.records.length, 0)
  assert.equal(skipped.skipped.length, 1)
})

test('model directory without weights is a clean error', async () => {
  await assert.rejects(() => loadModelDir(join(workDir, 'nowhere')), /locally/)
})

test('cli writes the FEAT file end to end', async () => {
  const out = join(workDir, 'features.feat')
  const code = await cliMain([
    '--manifest', manifestPath,
    '--model', modelDir,
    '--out', out,
  ])
  assert.equal(code, 0)
  const blob = readFileSync(out)
  assert.equal(blob.subarray(0, 8).toString('ascii'), FEAT_MAGIC)
  const decoded = decodeFeat(blob)
  assert.equal(decoded.dim, 2048)
  assert.equal(decoded.records.length, 3)

  const again = join(workDir, 'features2.feat')
  assert.equal(
    await cliMain(['--manifest', manifestPath, '--model', modelDir, '--out', again]),
    0,
  )
  assert.deepEqual(readFileSync(again), blob, 'rerun must be byte-identical')
})

test('cli usage errors exit 1', async () => {
  assert.equal(await cliMain(['--manifest', 'x.csv']), 1)
  assert.equal(await cliMain(['--manifest', 'x.csv', '--model', 'm', '--out', 'o',
                              '--on-error', 'maybe']), 1)
})

test('cli data errors exit 2', async () => {
  const out = join(workDir, 'x.feat')
  assert.equal(
    await cliMain(['--manifest', join(workDir, 'no.csv'), '--model', modelDir,
                   '--out', out]),
    2,
  )
})
