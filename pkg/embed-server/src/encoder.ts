// Deterministic analytic encoder sharing the embedding space the
// pipeline's planted-frame oracles assume: components 0-2 carry mean
// RGB / color keywords, component 3 is the neutral axis, components 4+
// hold hashed colorless tokens. No weights, no RNG, so identical
// requests always embed identically.

import { PNG } from "pngjs";

export const DIM = 512;
export const TOKEN_BUDGET = 77;

const NEUTRAL_COMPONENT = 3;
const HASH_BASE = 4;

const COLOR_KEYWORDS: Record<string, [number, number, number]> = {
  red: [1, 0, 0],
  green: [0, 1, 0],
  blue: [0, 0, 1],
  white: [1, 1, 1],
  yellow: [1, 1, 0],
  cyan: [0, 1, 1],
  magenta: [1, 0, 1],
};

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = (1n << 64n) - 1n;

/** FNV-1a 64-bit hash; fixed algorithm so token slots never move. */
export function fnv1a64(data: Buffer): bigint {
  let h = FNV_OFFSET;
  for (const byte of data) {
    h ^= BigInt(byte);
    h = (h * FNV_PRIME) & MASK64;
  }
  return h;
}

/** Raised for payloads that cannot be encoded; maps to HTTP 400. */
export class EncodeError extends Error {}

function normalize(vec: Float64Array): Float64Array {
  let ss = 0;
  for (let i = 0; i < vec.length; i++) ss += vec[i] * vec[i];
  const norm = Math.sqrt(ss);
  for (let i = 0; i < vec.length; i++) vec[i] /= norm;
  return vec;
}

export interface TextEmbedding {
  vector: Float64Array;
  truncated: boolean;
}

const EDGE_PUNCT = /^[.,!?;:'"()[\]]+|[.,!?;:'"()[\]]+$/g;

export function embedText(text: string): TextEmbedding {
  let tokens = text
    .toLowerCase()
    .split(/\s+/)
    .map((t) => t.replace(EDGE_PUNCT, ""))
    .filter(Boolean);
  if (tokens.length === 0) {
    throw new EncodeError(`no tokens in text ${JSON.stringify(text)}`);
  }
  // context-length cap: keep the head tokens, flag the cut
  const truncated = tokens.length > TOKEN_BUDGET;
  if (truncated) tokens = tokens.slice(0, TOKEN_BUDGET);

  const vec = new Float64Array(DIM);
  let matched = 0;
  for (const tok of tokens) {
    const rgb = COLOR_KEYWORDS[tok];
    if (rgb) {
      vec[0] += rgb[0];
      vec[1] += rgb[1];
      vec[2] += rgb[2];
      matched += 1;
    } else if (tok === "black") {
      vec[NEUTRAL_COMPONENT] += 1;
      matched += 1;
    }
  }
  if (matched > 0) {
    for (let i = 0; i < vec.length; i++) vec[i] /= matched;
  } else {
    for (const tok of tokens) {
      const h = fnv1a64(Buffer.from(tok, "utf-8"));
      vec[HASH_BASE + Number(h % BigInt(DIM - HASH_BASE))] += 1;
    }
  }
  return { vector: normalize(vec), truncated };
}

/** Embed interleaved RGB bytes (length = 3 * pixel count). */
export function embedImageRgb(rgb: Uint8Array): Float64Array {
  if (rgb.length === 0 || rgb.length % 3 !== 0) {
    throw new EncodeError(`image byte length ${rgb.length} is not RGB`);
  }
  const pixels = rgb.length / 3;
  let r = 0;
  let g = 0;
  let b = 0;
  for (let i = 0; i < rgb.length; i += 3) {
    r += rgb[i];
    g += rgb[i + 1];
    b += rgb[i + 2];
  }
  const vec = new Float64Array(DIM);
  vec[0] = r / pixels / 255;
  vec[1] = g / pixels / 255;
  vec[2] = b / pixels / 255;
  if (Math.hypot(vec[0], vec[1], vec[2]) < 1e-9) {
    vec[0] = vec[1] = vec[2] = 0;
    vec[NEUTRAL_COMPONENT] = 1;
  }
  return normalize(vec);
}

/** Decode a PNG buffer to interleaved RGB, dropping any alpha channel. */
export function decodePngRgb(data: Buffer): Uint8Array {
  let png: PNG;
  try {
    png = PNG.sync.read(data);
  } catch (err) {
    const msg = err instanceof Error ? err.message : String(err);
    throw new EncodeError(`not a decodable PNG: ${msg}`);
  }
  const n = png.width * png.height;
  const out = new Uint8Array(n * 3);
  for (let i = 0; i < n; i++) {
    out[i * 3] = png.data[i * 4];
    out[i * 3 + 1] = png.data[i * 4 + 1];
    out[i * 3 + 2] = png.data[i * 4 + 2];
  }
  return out;
}

export function embedImagePng(base64Png: string): Float64Array {
  const raw = Buffer.from(base64Png, "base64");
  if (raw.length === 0) throw new EncodeError("empty image payload");
  return embedImageRgb(decodePngRgb(raw));
}
