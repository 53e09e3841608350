/** Chart data derivation: every point comes from service response fields. */

export type Point = [number, number];

export interface StepFlag {
  episode: number;
  explored: boolean;
}

/** Episode-quality line: one point per completed episode, (index, mean). */
export function qualityPoints(episodeMeans: number[]): Point[] {
  return episodeMeans.map((mean, index) => [index + 1, mean]);
}

/** Cumulative explored fraction after each completed episode. */
export function explorationPoints(steps: StepFlag[]): Point[] {
  const episodes = [...new Set(steps.map((step) => step.episode))].sort((a, b) => a - b);
  const points: Point[] = [];
  let explored = 0;
  let total = 0;
  for (const episode of episodes) {
    for (const step of steps) {
      if (step.episode === episode) {
        total += 1;
        if (step.explored) {
          explored += 1;
        }
      }
    }
    points.push([episode, explored / total]);
  }
  return points;
}

/** Overall explore/exploit ratio; null before any step exists. */
export function exploredRatio(exploredCount: number, totalSteps: number): number | null {
  if (totalSteps === 0) {
    return null;
  }
  return exploredCount / totalSteps;
}

/** Fixed-grid polyline for an inline SVG chart; empty series → no points. */
export function polylinePoints(
  points: Point[],
  width: number,
  height: number,
  yMax: number,
): string {
  if (points.length === 0) {
    return "";
  }
  const xMax = Math.max(...points.map(([x]) => x), 1);
  return points
    .map(([x, y]) => {
      const px = (x / xMax) * (width - 8) + 4;
      const py = height - 4 - (y / yMax) * (height - 8);
      return `${px.toFixed(1)},${py.toFixed(1)}`;
    })
    .join(" ");
}
