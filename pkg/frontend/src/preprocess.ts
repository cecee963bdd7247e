/**
 * Image loading and preprocessing for the backbone.
 *
 * PNG input of any size becomes a float32 H x W x 3 array:
 * grayscale sources are replicated across the three channels, resizing is
 * bilinear with half-pixel centers, and pixel values stay in 0-255 (the
 * pretrained backbone family normalizes inside the model). All of this is
 * recorded in the export meta because downstream results are sensitive
 * to it.
 */

import { promises as fs } from 'fs'
import { PNG } from 'pngjs'

export const PREPROCESS_SPEC = {
  resize: 'bilinear, half-pixel centers',
  pixel_range: '0-255 float',
  grayscale: 'replicated across 3 channels',
}

export interface RgbImage {
  height: number
  width: number
  /** row-major (h, w, c), c = RGB */
  values: Float32Array
}

export async function loadPng(path: string): Promise<RgbImage> {
  const png = PNG.sync.read(await fs.readFile(path))
  const { width, height, data } = png // RGBA, 8-bit
  const values = new Float32Array(height * width * 3)
  for (let i = 0; i < height * width; i++) {
    values[i * 3] = data[i * 4]
    values[i * 3 + 1] = data[i * 4 + 1]
    values[i * 3 + 2] = data[i * 4 + 2]
  }
  return { height, width, values }
}

export function resizeBilinear(image: RgbImage, outHeight: number, outWidth: number): RgbImage {
  const { height, width, values } = image
  const out = new Float32Array(outHeight * outWidth * 3)
  const scaleY = height / outHeight
  const scaleX = width / outWidth
  for (let y = 0; y < outHeight; y++) {
    const srcY = Math.min(Math.max((y + 0.5) * scaleY - 0.5, 0), height - 1)
    const y0 = Math.floor(srcY)
    const y1 = Math.min(y0 + 1, height - 1)
    const fy = srcY - y0
    for (let x = 0; x < outWidth; x++) {
      const srcX = Math.min(Math.max((x + 0.5) * scaleX - 0.5, 0), width - 1)
      const x0 = Math.floor(srcX)
      const x1 = Math.min(x0 + 1, width - 1)
      const fx = srcX - x0
      for (let c = 0; c < 3; c++) {
        const v00 = values[(y0 * width + x0) * 3 + c]
        const v01 = values[(y0 * width + x1) * 3 + c]
        const v10 = values[(y1 * width + x0) * 3 + c]
        const v11 = values[(y1 * width + x1) * 3 + c]
        const top = v00 + (v01 - v00) * fx
        const bottom = v10 + (v11 - v10) * fx
        out[(y * outWidth + x) * 3 + c] = top + (bottom - top) * fy
      }
    }
  }
  return { height: outHeight, width: outWidth, values: out }
}

export async function loadModelInput(path: string, size: number): Promise<RgbImage> {
  const image = await loadPng(path)
  if (image.height === size && image.width === size) {
    return image
  }
  return resizeBilinear(image, size, size)
}
