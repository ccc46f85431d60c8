/** Tiny string-based SVG assembly; no DOM, no timestamps, fixed styling. */

export type Attrs = Record<string, string | number>;

export function esc(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Short, stable decimal rendering so identical input gives identical bytes. */
export function fmt(v: number): string {
  const r = Number(v.toFixed(2));
  return String(r === 0 ? 0 : r);
}

export function el(tag: string, attrs: Attrs, body = ""): string {
  let out = `<${tag}`;
  for (const [k, v] of Object.entries(attrs)) {
    out += ` ${k}="${typeof v === "number" ? fmt(v) : esc(v)}"`;
  }
  return body === "" ? `${out}/>` : `${out}>${body}</${tag}>`;
}

export function text(x: number, y: number, s: string, attrs: Attrs = {}): string {
  return el("text", { x, y, "font-family": FONT, "font-size": 12, fill: "#333", ...attrs }, esc(s));
}

export function document(width: number, height: number, body: string): string {
  const head =
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}">`;
  const bg = el("rect", { x: 0, y: 0, width, height, fill: "#ffffff" });
  return `${head}${bg}${body}</svg>\n`;
}

export const FONT = "Helvetica, Arial, sans-serif";

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];
