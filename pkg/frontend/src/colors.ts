// Stable zone colors: a procedure's color is a pure function of its text
// encoding, so the same procedure keeps its color across slices and
// sessions.

export function hashString(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i += 1) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

const PALETTE_SIZE = 64;

function paletteEntry(index: number): string {
  // Golden-angle hue walk with alternating lightness bands keeps nearby
  // indices visually distinct.
  const hue = (index * 137.508) % 360;
  const lightness = 42 + (index % 4) * 9;
  const saturation = 62 + (index % 3) * 12;
  return `hsl(${hue.toFixed(1)}, ${saturation}%, ${lightness}%)`;
}

export function colorForProcedure(encoded: string): string {
  return paletteEntry(hashString(encoded) % PALETTE_SIZE);
}

export function cssColorToRgb(color: string): [number, number, number] {
  const match = /^hsl\(([\d.]+), (\d+)%, (\d+)%\)$/.exec(color);
  if (!match) throw new Error(`unsupported color ${color}`);
  const h = parseFloat(match[1]) / 360;
  const s = parseInt(match[2], 10) / 100;
  const l = parseInt(match[3], 10) / 100;
  const q = l < 0.5 ? l * (1 + s) : l + s - l * s;
  const p = 2 * l - q;
  const channel = (t: number): number => {
    if (t < 0) t += 1;
    if (t > 1) t -= 1;
    if (t < 1 / 6) return p + (q - p) * 6 * t;
    if (t < 1 / 2) return q;
    if (t < 2 / 3) return p + (q - p) * (2 / 3 - t) * 6;
    return p;
  };
  return [
    Math.round(channel(h + 1 / 3) * 255),
    Math.round(channel(h) * 255),
    Math.round(channel(h - 1 / 3) * 255),
  ];
}
