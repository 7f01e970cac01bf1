/**
 * Binary framing shared with the server: every wire object is a list of
 * fields, each a 4-byte big-endian length followed by the raw bytes.
 * Parsing is strict, a frame must consume its input exactly.
 */

export function u32(value: number): Uint8Array {
  if (!Number.isInteger(value) || value < 0 || value > 0xffffffff) {
    throw new Error(`u32 out of range: ${value}`);
  }
  const out = new Uint8Array(4);
  new DataView(out.buffer).setUint32(0, value);
  return out;
}

export function readU32(data: Uint8Array): number {
  if (data.length !== 4) throw new Error("u32 field must be exactly 4 bytes");
  return new DataView(data.buffer, data.byteOffset, 4).getUint32(0);
}

export function readU64(data: Uint8Array): bigint {
  if (data.length !== 8) throw new Error("u64 field must be exactly 8 bytes");
  return new DataView(data.buffer, data.byteOffset, 8).getBigUint64(0);
}

export function writeFields(...fields: Uint8Array[]): Uint8Array {
  let total = 0;
  for (const f of fields) total += 4 + f.length;
  const out = new Uint8Array(total);
  let offset = 0;
  for (const f of fields) {
    out.set(u32(f.length), offset);
    out.set(f, offset + 4);
    offset += 4 + f.length;
  }
  return out;
}

export function readFields(data: Uint8Array, count: number): Uint8Array[] {
  const fields: Uint8Array[] = [];
  let offset = 0;
  for (let i = 0; i < count; i++) {
    if (offset + 4 > data.length) throw new Error("truncated field header");
    const length = new DataView(data.buffer, data.byteOffset + offset, 4).getUint32(0);
    offset += 4;
    if (offset + length > data.length) throw new Error("truncated field body");
    fields.push(data.subarray(offset, offset + length));
    offset += length;
  }
  if (offset !== data.length) throw new Error("trailing bytes after last field");
  return fields;
}

export function b64e(data: Uint8Array): string {
  let raw = "";
  for (let i = 0; i < data.length; i++) raw += String.fromCharCode(data[i]);
  return btoa(raw);
}

export function b64d(text: string): Uint8Array {
  const raw = atob(text);
  const out = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) out[i] = raw.charCodeAt(i);
  return out;
}

export function hexd(text: string): Uint8Array {
  if (text.length % 2 !== 0 || /[^0-9a-fA-F]/.test(text)) {
    throw new Error("bad hex string");
  }
  const out = new Uint8Array(text.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(text.slice(2 * i, 2 * i + 2), 16);
  }
  return out;
}

export function hexe(data: Uint8Array): string {
  let out = "";
  for (let i = 0; i < data.length; i++) out += data[i].toString(16).padStart(2, "0");
  return out;
}

export function bytesEqual(a: Uint8Array, b: Uint8Array): boolean {
  if (a.length !== b.length) return false;
  for (let i = 0; i < a.length; i++) {
    if (a[i] !== b[i]) return false;
  }
  return true;
}

export function ascii(text: string): Uint8Array {
  return new TextEncoder().encode(text);
}
