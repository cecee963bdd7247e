/**
 * Binary tensor container (.mnt), byte-compatible with the scoring toolkit.
 *
 * Layout, little-endian throughout:
 *   bytes  0-3   magic "MONT"
 *   bytes  4-7   format version, uint32 (1)
 *   bytes  8-19  height, width, channels as three uint32
 *   bytes 20-23  dtype code, uint32 (1 = float32)
 *   bytes 24-    height*width*channels float32 values, row-major (h, w, c)
 */

import { promises as fs } from 'fs'

export const MAGIC = 'MONT'
export const FORMAT_VERSION = 1
export const DTYPE_FLOAT32 = 1
export const HEADER_BYTES = 24

export interface TensorDims {
  height: number
  width: number
  channels: number
}

export function encodeTensor(dims: TensorDims, values: Float32Array): Buffer {
  const { height, width, channels } = dims
  if (
    !Number.isInteger(height) || !Number.isInteger(width) || !Number.isInteger(channels) ||
    height < 1 || width < 1 || channels < 1
  ) {
    throw new Error(`tensor dims must be positive integers, got ${height}x${width}x${channels}`)
  }
  const expected = height * width * channels
  if (values.length !== expected) {
    throw new Error(`dims ${height}x${width}x${channels} need ${expected} values, got ${values.length}`)
  }
  for (let i = 0; i < values.length; i++) {
    if (!Number.isFinite(values[i])) {
      throw new Error(`non-finite value at flat index ${i}`)
    }
  }
  const buf = Buffer.alloc(HEADER_BYTES + expected * 4)
  buf.write(MAGIC, 0, 'ascii')
  buf.writeUInt32LE(FORMAT_VERSION, 4)
  buf.writeUInt32LE(height, 8)
  buf.writeUInt32LE(width, 12)
  buf.writeUInt32LE(channels, 16)
  buf.writeUInt32LE(DTYPE_FLOAT32, 20)
  for (let i = 0; i < expected; i++) {
    buf.writeFloatLE(values[i], HEADER_BYTES + i * 4)
  }
  return buf
}

export function decodeTensor(buf: Buffer): { dims: TensorDims; values: Float32Array } {
  if (buf.length < HEADER_BYTES) {
    throw new Error(`truncated header (${buf.length} bytes)`)
  }
  if (buf.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error(`bad magic ${JSON.stringify(buf.toString('ascii', 0, 4))}`)
  }
  if (buf.readUInt32LE(4) !== FORMAT_VERSION) {
    throw new Error(`unsupported format version ${buf.readUInt32LE(4)}`)
  }
  const height = buf.readUInt32LE(8)
  const width = buf.readUInt32LE(12)
  const channels = buf.readUInt32LE(16)
  if (buf.readUInt32LE(20) !== DTYPE_FLOAT32) {
    throw new Error(`unsupported dtype code ${buf.readUInt32LE(20)}`)
  }
  if (height < 1 || width < 1 || channels < 1) {
    throw new Error(`non-positive dims ${height}x${width}x${channels}`)
  }
  const expected = height * width * channels
  if (buf.length - HEADER_BYTES !== expected * 4) {
    throw new Error(`dims ${height}x${width}x${channels} need ${expected * 4} payload bytes, found ${buf.length - HEADER_BYTES}`)
  }
  const values = new Float32Array(expected)
  for (let i = 0; i < expected; i++) {
    values[i] = buf.readFloatLE(HEADER_BYTES + i * 4)
  }
  return { dims: { height, width, channels }, values }
}

export async function writeTensorFile(path: string, dims: TensorDims, values: Float32Array): Promise<void> {
  await fs.writeFile(path, encodeTensor(dims, values))
}

export async function readTensorFile(path: string): Promise<{ dims: TensorDims; values: Float32Array }> {
  return decodeTensor(await fs.readFile(path))
}
