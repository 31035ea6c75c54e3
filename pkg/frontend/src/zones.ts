// Zone-explorer state machine: fetches id grids (full square for n=2,
// plane slices for n=3) and exposes color/selection helpers. Rasterizing
// is a pure function so it can be tested without a canvas.

import {
  ApiClient,
  FrontiersResponse,
  isPending,
  SliceResponse,
  SquareMapResponse,
} from "./api.js";
import { colorForProcedure, cssColorToRgb } from "./colors.js";

export interface ZoneViewState {
  n: 2 | 3;
  plane: "z" | "y" | "x" | "diag";
  value: number;
  resolution: number;
  grid: number[][] | null;
  legend: Record<string, string>;
  outside: number;
  pending: { progress: number } | null;
  frontiers: FrontiersResponse | null;
  selected: { id: number; procedure: string } | null;
  error: string | null;
}

export class ZoneExplorer {
  state: ZoneViewState = {
    n: 2,
    plane: "z",
    value: 0.17,
    resolution: 192,
    grid: null,
    legend: {},
    outside: 0xffff,
    pending: null,
    frontiers: null,
    selected: null,
    error: null,
  };
  private listeners: Array<() => void> = [];

  constructor(private api: ApiClient) {}

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener();
  }

  setN(n: 2 | 3): Promise<void> {
    this.state = { ...this.state, n, grid: null, selected: null };
    return this.load();
  }

  setPlane(plane: "z" | "y" | "x" | "diag"): Promise<void> {
    this.state = { ...this.state, plane };
    return this.load();
  }

  setValue(value: number): Promise<void> {
    this.state = { ...this.state, value };
    return this.load();
  }

  async load(): Promise<void> {
    this.state = { ...this.state, error: null };
    this.emit();
    try {
      if (this.state.n === 2) {
        const map = await this.api.squareMap(2, this.state.resolution);
        if (isPending(map)) {
          this.state = { ...this.state, pending: { progress: map.progress } };
        } else {
          const body = map as SquareMapResponse;
          const frontiers = await this.api.frontiers(2);
          this.state = {
            ...this.state,
            grid: body.ids,
            legend: body.legend,
            outside: 0xffff,
            pending: null,
            frontiers,
          };
        }
      } else {
        const slice = await this.api.slice(
          3,
          this.state.plane,
          this.state.value,
          this.state.resolution,
        );
        if (isPending(slice)) {
          this.state = { ...this.state, pending: { progress: slice.progress } };
        } else {
          const body = slice as SliceResponse;
          this.state = {
            ...this.state,
            grid: body.ids,
            legend: body.legend,
            outside: body.outside,
            pending: null,
            frontiers: null,
          };
        }
      }
    } catch (error) {
      this.state = {
        ...this.state,
        error: error instanceof Error ? error.message : String(error),
        pending: null,
      };
    }
    this.emit();
  }

  distinctIds(): number[] {
    if (!this.state.grid) return [];
    const ids = new Set<number>();
    for (const row of this.state.grid) {
      for (const id of row) {
        if (id !== this.state.outside) ids.add(id);
      }
    }
    return [...ids].sort((a, b) => a - b);
  }

  colorOf(id: number): string {
    const procedure = this.state.legend[String(id)];
    return procedure ? colorForProcedure(procedure) : "#222";
  }

  /** Select the zone under a grid cell (row counts from the top). */
  pick(row: number, col: number): void {
    const grid = this.state.grid;
    if (!grid || row < 0 || row >= grid.length) return;
    const id = grid[row][col];
    if (id === this.state.outside) return;
    const procedure = this.state.legend[String(id)];
    this.state = { ...this.state, selected: { id, procedure } };
    this.emit();
  }
}

/** RGBA pixels for an id grid; rows render top-down in grid order. */
export function rasterize(
  grid: number[][],
  outside: number,
  colorOf: (id: number) => string,
): Uint8ClampedArray {
  const rows = grid.length;
  const cols = grid[0]?.length ?? 0;
  const pixels = new Uint8ClampedArray(rows * cols * 4);
  const cache = new Map<number, [number, number, number]>();
  for (let r = 0; r < rows; r += 1) {
    for (let c = 0; c < cols; c += 1) {
      const id = grid[r][c];
      const offset = (r * cols + c) * 4;
      if (id === outside) {
        pixels[offset + 3] = 0;
        continue;
      }
      let rgb = cache.get(id);
      if (!rgb) {
        rgb = cssColorToRgb(colorOf(id));
        cache.set(id, rgb);
      }
      pixels[offset] = rgb[0];
      pixels[offset + 1] = rgb[1];
      pixels[offset + 2] = rgb[2];
      pixels[offset + 3] = 255;
    }
  }
  return pixels;
}
