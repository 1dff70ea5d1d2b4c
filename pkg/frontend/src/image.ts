import { readFileSync } from 'fs'
import * as tf from '@tensorflow/tfjs'
import jpeg from 'jpeg-js'
import { PNG } from 'pngjs'

export const CROP_SIZE = 224
export const RESIZE_SHORTER_SIDE = 256

// canonical channel statistics for pretrained backbones
const MEAN = [0.485, 0.456, 0.406]
const STD = [0.229, 0.224, 0.225]

export interface DecodedImage {
  width: number
  height: number
  /** RGB interleaved, length width*height*3, values 0..255 */
  pixels: Uint8Array
}

export function decodeImage(buffer: Buffer): DecodedImage {
  if (buffer.length >= 8 && buffer.readUInt32BE(0) === 0x89504e47) {
    const png = PNG.sync.read(buffer)
    return { width: png.width, height: png.height, pixels: dropAlpha(png.data) }
  }
  if (buffer.length >= 2 && buffer.readUInt16BE(0) === 0xffd8) {
    const decoded = jpeg.decode(buffer, { useTArray: true, formatAsRGBA: true })
    return {
      width: decoded.width,
      height: decoded.height,
      pixels: dropAlpha(decoded.data),
    }
  }
  throw new Error('unsupported image format (PNG and JPEG are accepted)')
}

function dropAlpha(rgba: Uint8Array | Buffer): Uint8Array {
  const pixels = new Uint8Array((rgba.length / 4) * 3)
  for (let src = 0, dst = 0; src < rgba.length; src += 4, dst += 3) {
    pixels[dst] = rgba[src]
    pixels[dst + 1] = rgba[src + 1]
    pixels[dst + 2] = rgba[src + 2]
  }
  return pixels
}

export function loadImageFile(path: string): DecodedImage {
  return decodeImage(readFileSync(path))
}

/**
 * Resize so the shorter side is 256, center-crop 224, scale to [0, 1]
 * and normalize per channel. Returns a [224, 224, 3] float tensor.
 */
export function preprocess(image: DecodedImage): tf.Tensor3D {
  return tf.tidy(() => {
    let data = tf
      .tensor3d(image.pixels, [image.height, image.width, 3], 'float32')
      .div(255) as tf.Tensor3D
    const scale = RESIZE_SHORTER_SIDE / Math.min(image.width, image.height)
    const resizedH = Math.max(CROP_SIZE, Math.round(image.height * scale))
    const resizedW = Math.max(CROP_SIZE, Math.round(image.width * scale))
    data = tf.image.resizeBilinear(data, [resizedH, resizedW])
    const top = Math.floor((resizedH - CROP_SIZE) / 2)
    const left = Math.floor((resizedW - CROP_SIZE) / 2)
    const cropped = tf.slice(data, [top, left, 0], [CROP_SIZE, CROP_SIZE, 3])
    return cropped.sub(tf.tensor1d(MEAN)).div(tf.tensor1d(STD)) as tf.Tensor3D
  })
}
