/**
 * Minimal reader for .npz containers (zip of .npy entries).
 *
 * The cpdecode stream container is written with numpy's uncompressed
 * savez, so every zip entry is STORED; deflated entries are rejected with
 * a clear error rather than silently mis-parsed. Supported dtypes cover
 * the container schema: little-endian f8/f4/i8/i4, bool, and UCS-4
 * strings.
 */

export interface NpyArray {
  dtype: string;
  shape: number[];
  /** Flat data in C order; strings are decoded to a JS string array. */
  data: Float64Array | Float32Array | BigInt64Array | Int32Array | Uint8Array | string[];
}

const EOCD_SIG = 0x06054b50;
const CENTRAL_SIG = 0x02014b50;
const LOCAL_SIG = 0x04034b50;

interface ZipEntry {
  name: string;
  offset: number;
  compressedSize: number;
  method: number;
}

function findEocd(buf: Buffer): number {
  // EOCD is at the end, possibly preceded by a comment of up to 64k
  const start = Math.max(0, buf.length - 22 - 65536);
  for (let i = buf.length - 22; i >= start; i--) {
    if (buf.readUInt32LE(i) === EOCD_SIG) return i;
  }
  throw new Error("not a zip file: end-of-central-directory signature not found");
}

function readEntries(buf: Buffer): ZipEntry[] {
  const eocd = findEocd(buf);
  const count = buf.readUInt16LE(eocd + 10);
  let p = buf.readUInt32LE(eocd + 16);
  const entries: ZipEntry[] = [];
  for (let i = 0; i < count; i++) {
    if (buf.readUInt32LE(p) !== CENTRAL_SIG) {
      throw new Error("corrupt zip: bad central directory record");
    }
    const method = buf.readUInt16LE(p + 10);
    const compressedSize = buf.readUInt32LE(p + 20);
    const nameLen = buf.readUInt16LE(p + 28);
    const extraLen = buf.readUInt16LE(p + 30);
    const commentLen = buf.readUInt16LE(p + 32);
    const offset = buf.readUInt32LE(p + 42);
    const name = buf.toString("utf8", p + 46, p + 46 + nameLen);
    entries.push({ name, offset, compressedSize, method });
    p += 46 + nameLen + extraLen + commentLen;
  }
  return entries;
}

function entryData(buf: Buffer, entry: ZipEntry): Buffer {
  if (buf.readUInt32LE(entry.offset) !== LOCAL_SIG) {
    throw new Error(`corrupt zip: bad local header for ${entry.name}`);
  }
  if (entry.method !== 0) {
    throw new Error(
      `${entry.name} is compressed (method ${entry.method}); expected a stored npz`
    );
  }
  const nameLen = buf.readUInt16LE(entry.offset + 26);
  const extraLen = buf.readUInt16LE(entry.offset + 28);
  const dataStart = entry.offset + 30 + nameLen + extraLen;
  return buf.subarray(dataStart, dataStart + entry.compressedSize);
}

function parseNpy(buf: Buffer, name: string): NpyArray {
  if (buf.length < 10 || buf[0] !== 0x93 || buf.toString("ascii", 1, 6) !== "NUMPY") {
    throw new Error(`${name}: not an npy payload`);
  }
  const major = buf[6];
  const headerLen = major >= 2 ? buf.readUInt32LE(8) : buf.readUInt16LE(8);
  const headerStart = major >= 2 ? 12 : 10;
  const header = buf.toString("latin1", headerStart, headerStart + headerLen);

  const descrMatch = header.match(/'descr':\s*'([^']+)'/);
  const fortranMatch = header.match(/'fortran_order':\s*(True|False)/);
  const shapeMatch = header.match(/'shape':\s*\(([^)]*)\)/);
  if (!descrMatch || !fortranMatch || !shapeMatch) {
    throw new Error(`${name}: unparseable npy header: ${header}`);
  }
  if (fortranMatch[1] === "True") {
    throw new Error(`${name}: fortran-ordered arrays are not supported`);
  }
  const dtype = descrMatch[1];
  const shape = shapeMatch[1]
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => parseInt(s, 10));
  const count = shape.reduce((a, b) => a * b, 1);
  const body = buf.subarray(headerStart + headerLen);
  // copy so alignment is guaranteed for typed-array views
  const bytes = Uint8Array.prototype.slice.call(body);

  let data: NpyArray["data"];
  if (dtype === "<f8") data = new Float64Array(bytes.buffer, 0, count);
  else if (dtype === "<f4") data = new Float32Array(bytes.buffer, 0, count);
  else if (dtype === "<i8") data = new BigInt64Array(bytes.buffer, 0, count);
  else if (dtype === "<i4") data = new Int32Array(bytes.buffer, 0, count);
  else if (dtype === "|b1") data = new Uint8Array(bytes.buffer, 0, count);
  else if (dtype.startsWith("<U")) {
    const width = parseInt(dtype.slice(2), 10);
    const view = new Uint32Array(bytes.buffer, 0, count * width);
    const strings: string[] = [];
    for (let i = 0; i < count; i++) {
      let s = "";
      for (let j = 0; j < width; j++) {
        const code = view[i * width + j];
        if (code === 0) break;
        s += String.fromCodePoint(code);
      }
      strings.push(s);
    }
    data = strings;
  } else {
    throw new Error(`${name}: unsupported dtype ${dtype}`);
  }
  return { dtype, shape, data };
}

/** Parse every array in an .npz buffer, keyed by entry name minus ".npy". */
export function parseNpz(buf: Buffer): Map<string, NpyArray> {
  const out = new Map<string, NpyArray>();
  for (const entry of readEntries(buf)) {
    const key = entry.name.endsWith(".npy") ? entry.name.slice(0, -4) : entry.name;
    out.set(key, parseNpy(entryData(buf, entry), entry.name));
  }
  return out;
}
