// Analytics screens: demographics series, and tech/policy tree layouts with
// unlocked/available/locked states, all computed from protocol data.

export interface TechNode {
  id: string;
  era: string;
  cost: number;
  prereqs: string[];
  column: number;     // era index
  row: number;
  state: "unlocked" | "available" | "locked";
}

export function layoutTechTree(rules: any, unlockedFlags: number[],
                               availableFlags: number[]): TechNode[] {
  const eras: string[] = rules.eras;
  const perColumn = new Map<number, number>();
  return rules.techs.map((tech: any, i: number) => {
    const column = eras.indexOf(tech.era);
    const row = perColumn.get(column) ?? 0;
    perColumn.set(column, row + 1);
    const state = unlockedFlags[i] ? "unlocked"
      : availableFlags[i] ? "available" : "locked";
    return {
      id: tech.id,
      era: tech.era,
      cost: tech.science_cost,
      prereqs: tech.prereq_ids,
      column,
      row,
      state,
    };
  });
}

export function techEdges(nodes: TechNode[]): Array<[number, number]> {
  const index = new Map(nodes.map((n, i) => [n.id, i] as const));
  const edges: Array<[number, number]> = [];
  nodes.forEach((node, to) => {
    for (const p of node.prereqs) {
      const from = index.get(p);
      if (from !== undefined) edges.push([from, to]);
    }
  });
  return edges;
}

export interface PolicyNode {
  id: string;
  tree: string;
  slot: number;
  state: "adopted" | "available" | "locked";
}

export function layoutPolicyTrees(rules: any, adoptedFlags: number[],
                                  affordableFlags: number[]): PolicyNode[] {
  return rules.policies.map((policy: any, i: number) => ({
    id: policy.id,
    tree: policy.tree,
    slot: policy.slot,
    state: adoptedFlags[i] ? "adopted"
      : affordableFlags[i] ? "available" : "locked",
  }));
}

/** The statistics the demographics dropdown offers, as the service names
 * them; anything it rejects is omitted. */
export const DEMOGRAPHICS_STATS = [
  "population", "gold", "science_rate", "culture_lifetime", "tourism",
  "cities", "units", "techs_unlocked", "delegates",
];
