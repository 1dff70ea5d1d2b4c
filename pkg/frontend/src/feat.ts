/**
 * FEAT binary store: the interchange format consumed by the retrieval
 * toolkit. Little-endian throughout:
 *
 *   8 bytes   magic "VGFEAT01"
 *   u32       dim
 *   u32       record count
 *   per record:
 *     u16       class-name byte length
 *     bytes     class name, UTF-8
 *     u32       instance id
 *     dim x f32 feature vector
 */

export const FEAT_MAGIC = 'VGFEAT01'

export interface FeatureRecord {
  objectClass: string
  instanceId: number
  vector: Float32Array
}

export function encodeFeat(dim: number, records: FeatureRecord[]): Buffer {
  const chunks: Buffer[] = []
  const header = Buffer.alloc(16)
  header.write(FEAT_MAGIC, 0, 'ascii')
  header.writeUInt32LE(dim, 8)
  header.writeUInt32LE(records.length, 12)
  chunks.push(header)
  for (const record of records) {
    if (record.vector.length !== dim) {
      throw new Error(
        `record ${record.objectClass}/${record.instanceId} has ` +
          `${record.vector.length} values, expected ${dim}`,
      )
    }
    const name = Buffer.from(record.objectClass, 'utf-8')
    const head = Buffer.alloc(2 + name.length + 4)
    head.writeUInt16LE(name.length, 0)
    name.copy(head, 2)
    head.writeUInt32LE(record.instanceId, 2 + name.length)
    chunks.push(head)
    const vec = Buffer.alloc(dim * 4)
    for (let i = 0; i < dim; i++) {
      vec.writeFloatLE(record.vector[i], i * 4)
    }
    chunks.push(vec)
  }
  return Buffer.concat(chunks)
}

export function decodeFeat(blob: Buffer): { dim: number; records: FeatureRecord[] } {
  if (blob.length < 16 || blob.toString('ascii', 0, 8) !== FEAT_MAGIC) {
    throw new Error('bad magic: not a FEAT file')
  }
  const dim = blob.readUInt32LE(8)
  const count = blob.readUInt32LE(12)
  const records: FeatureRecord[] = []
  let offset = 16
  for (let i = 0; i < count; i++) {
    if (offset + 2 > blob.length) throw new Error('truncated FEAT record')
    const nameLength = blob.readUInt16LE(offset)
    offset += 2
    const end = offset + nameLength + 4 + dim * 4
    if (end > blob.length) throw new Error('truncated FEAT record')
    const objectClass = blob.toString('utf-8', offset, offset + nameLength)
    offset += nameLength
    const instanceId = blob.readUInt32LE(offset)
    offset += 4
    const vector = new Float32Array(dim)
    for (let j = 0; j < dim; j++) {
      vector[j] = blob.readFloatLE(offset + j * 4)
    }
    offset += dim * 4
    records.push({ objectClass, instanceId, vector })
  }
  if (offset !== blob.length) {
    throw new Error(`${blob.length - offset} trailing bytes in FEAT file`)
  }
  return { dim, records }
}

export function cosine(a: Float32Array, b: Float32Array): number {
  let dot = 0
  let normA = 0
  let normB = 0
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i]
    normA += a[i] * a[i]
    normB += b[i] * b[i]
  }
  return dot / Math.sqrt(normA * normB)
}
