import { describe, expect, it } from "vitest";
import { parseMetricsCsv } from "../src/csv.js";
import { renderFamily } from "../src/families.js";

const HEADER = "run_id,episode,policy,attack,mean_reward,mean_latency,fbr,br";

function curveCsv(): string {
  const lines = [HEADER];
  for (const policy of ["mappo", "random"]) {
    for (let i = 0; i < 10; i++) {
      const reward = policy === "mappo" ? -80 + 4 * i : -90;
      lines.push(`seed0,${i * 10},${policy},direct,${reward},${8 - 0.2 * i},,`);
    }
  }
  return lines.join("\n") + "\n";
}

function sizeCsv(): string {
  const lines = [HEADER];
  for (const size of [25, 100, 200]) {
    for (const policy of ["mappo", "random"]) {
      const latency = size / 25 + (policy === "random" ? 2 : 0);
      lines.push(`seed0-size${size},0,${policy},direct,-10,${latency},,`);
    }
  }
  return lines.join("\n") + "\n";
}

function trustCsv(): string {
  const lines = [HEADER];
  for (let i = 0; i < 12; i++) {
    lines.push(`seed0,${i},no_premigration,none,-5,3,${0.3 - 0.02 * i},${0.5 + 0.04 * i}`);
  }
  return lines.join("\n") + "\n";
}

describe("renderFamily", () => {
  it("rewards family renders one polyline per policy", () => {
    const { svg, summary } = renderFamily("rewards", parseMetricsCsv(curveCsv()), 1);
    expect((svg.match(/<polyline/g) ?? [])).toHaveLength(2);
    expect(svg).toContain("average test rewards");
    expect(summary).toContain("mappo");
  });

  it("rendering is deterministic", () => {
    const rows = parseMetricsCsv(curveCsv());
    const a = renderFamily("latency", rows, 5);
    const b = renderFamily("latency", rows, 5);
    expect(a.svg).toBe(b.svg);
    expect(a.summary).toBe(b.summary);
  });

  it("task size sweep renders grouped bars in size order", () => {
    const { svg, summary } = renderFamily("task_size_sweep", parseMetricsCsv(sizeCsv()), 1);
    expect((svg.match(/<rect x=/g) ?? []).length).toBeGreaterThanOrEqual(6);
    expect(summary.indexOf("25 MB")).toBeLessThan(summary.indexOf("200 MB"));
  });

  it("trust family plots both rates", () => {
    const { svg, summary } = renderFamily("trust_rates", parseMetricsCsv(trustCsv()), 1);
    expect((svg.match(/<polyline/g) ?? [])).toHaveLength(2);
    expect(summary).toContain("fbr");
    expect(summary).toContain("br");
  });

  it("per-attack family stacks one panel per kind", () => {
    const rows = parseMetricsCsv(curveCsv()).map((r, i) => ({
      ...r,
      attack: i % 2 === 0 ? "direct" : "hybrid",
    }));
    const { svg } = renderFamily("per_attack_rewards", rows, 1);
    expect((svg.match(/<g transform/g) ?? [])).toHaveLength(2);
  });
});
