import assert from 'node:assert/strict'
import { test } from 'node:test'
import jpeg from 'jpeg-js'
import { PNG } from 'pngjs'
import { CROP_SIZE, decodeImage, preprocess } from '../src/image.js'

export function syntheticPng(
  width: number,
  height: number,
  paint: (x: number, y: number) => [number, number, number],
): Buffer {
  const png = new PNG({ width, height })
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = (y * width + x) * 4
      const [r, g, b] = paint(x, y)
      png.data[i] = r
      png.data[i + 1] = g
      png.data[i + 2] = b
      png.data[i + 3] = 255
    }
  }
  return PNG.sync.write(png)
}

test('png decode keeps dimensions and drops alpha', () => {
  const buffer = syntheticPng(12, 9, x => [x * 10, 0, 255])
  const image = decodeImage(buffer)
  assert.equal(image.width, 12)
  assert.equal(image.height, 9)
  assert.equal(image.pixels.length, 12 * 9 * 3)
  assert.equal(image.pixels[2], 255)
})

test('jpeg decode accepted', () => {
  const raw = Buffer.alloc(16 * 16 * 4, 128)
  const encoded = jpeg.encode({ data: raw, width: 16, height: 16 }, 90)
  const image = decodeImage(encoded.data)
  assert.equal(image.width, 16)
  assert.equal(image.height, 16)
})

test('unsupported format rejected', () => {
  assert.throws(() => decodeImage(Buffer.from('GIF89a....')), /unsupported/)
})

test('preprocess emits a normalized 224x224x3 tensor', () => {
  const image = decodeImage(syntheticPng(300, 280, (x, y) => [x % 256, y % 256, 40]))
  const tensor = preprocess(image)
  assert.deepEqual(tensor.shape, [CROP_SIZE, CROP_SIZE, 3])
  const values = tensor.dataSync()
  assert.ok(values.every(Number.isFinite))
  tensor.dispose()
})

test('preprocess is deterministic', () => {
  const image = decodeImage(syntheticPng(260, 300, (x, y) => [x % 251, (x + y) % 253, y % 249]))
  const a = preprocess(image).dataSync()
  const b = preprocess(image).dataSync()
  assert.deepEqual([...a], [...b])
})

test('small images are upscaled before the crop', () => {
  const image = decodeImage(syntheticPng(50, 40, () => [10, 20, 30]))
  const tensor = preprocess(image)
  assert.deepEqual(tensor.shape, [CROP_SIZE, CROP_SIZE, 3])
  tensor.dispose()
})
