// Composite-plan assembly against the published sub-space layout.
//
// The service sends per-session `action_sizes`; the layout (which index
// belongs to which control surface) follows the documented registry order:
//   unit_<s> x unitSlots | city_prod_<s> x citySlots
//   | city_focus_<s> x citySlots | research | policy | deal_<0..4>
//   | cs_gift_<k> x cityStates | congress_vote | end_turn
// Index 0 of every sub-space is pass; untouched sub-spaces submit passes.

export const MOVE_TARGETS = 37;
export const ABILITY_FOUND_CITY = 0;
export const ABILITY_IMPROVE = 1;
export const ABILITY_FORTIFY = 2;

export const DEAL_VERBS = [
  "pass", "declare_war", "propose_peace", "propose_lux_for_gold",
  "establish_trade_route", "accept_pending", "reject_pending",
];

export const FOCUS_NAMES = ["keep", "balanced", "food", "production", "gold", "science"];

export interface SubSpace {
  name: string;
  kind: string;
  slot: number;
  size: number;
}

export function buildLayout(unitSlots: number, citySlots: number,
                            cityStates: number, sizes: number[]): SubSpace[] {
  const out: SubSpace[] = [];
  for (let s = 0; s < unitSlots; s++) out.push({ name: `unit_${s}`, kind: "unit", slot: s, size: 0 });
  for (let s = 0; s < citySlots; s++) out.push({ name: `city_prod_${s}`, kind: "city_prod", slot: s, size: 0 });
  for (let s = 0; s < citySlots; s++) out.push({ name: `city_focus_${s}`, kind: "city_focus", slot: s, size: 0 });
  out.push({ name: "research", kind: "research", slot: -1, size: 0 });
  out.push({ name: "policy", kind: "policy", slot: -1, size: 0 });
  for (let o = 0; o < 5; o++) out.push({ name: `deal_${o}`, kind: "deal", slot: o, size: 0 });
  for (let k = 0; k < cityStates; k++) out.push({ name: `cs_gift_${k}`, kind: "cs_gift", slot: k, size: 0 });
  out.push({ name: "congress_vote", kind: "congress", slot: -1, size: 0 });
  out.push({ name: "end_turn", kind: "end_turn", slot: -1, size: 0 });
  if (out.length !== sizes.length) {
    throw new Error(`layout mismatch: derived ${out.length} sub-spaces, `
      + `service reports ${sizes.length}`);
  }
  for (let i = 0; i < out.length; i++) out[i].size = sizes[i];
  return out;
}

/** Deal sub-space slot -> opponent agent id (ascending, skipping self). */
export function opponentsOf(agent: number): number[] {
  const out: number[] = [];
  for (let a = 0; a < 6; a++) if (a !== agent) out.push(a);
  return out;
}

export class PlanBuilder {
  readonly layout: SubSpace[];
  readonly index = new Map<string, number>();
  private flat: number[];
  private masks: number[][];

  constructor(layout: SubSpace[], masks: number[][]) {
    this.layout = layout;
    layout.forEach((sub, i) => this.index.set(sub.name, i));
    this.flat = layout.map(() => 0);
    this.masks = masks;
  }

  updateMasks(masks: number[][]): void {
    this.masks = masks;
    this.flat = this.layout.map(() => 0);
  }

  legal(name: string, idx: number): boolean {
    const k = this.index.get(name);
    if (k === undefined) return false;
    return this.masks[k]?.[idx] === 1;
  }

  legalIndices(name: string): number[] {
    const k = this.index.get(name)!;
    const out: number[] = [];
    this.masks[k].forEach((bit, i) => { if (bit === 1) out.push(i); });
    return out;
  }

  /** Set a sub-action; illegal choices are refused (returns false). */
  set(name: string, idx: number): boolean {
    if (!this.legal(name, idx)) return false;
    this.flat[this.index.get(name)!] = idx;
    return true;
  }

  clear(name: string): void {
    const k = this.index.get(name);
    if (k !== undefined) this.flat[k] = 0;
  }

  get(name: string): number {
    return this.flat[this.index.get(name)!];
  }

  setUnitMove(slot: number, discIndex: number): boolean {
    return this.set(`unit_${slot}`, 1 + discIndex);
  }

  setUnitAbility(slot: number, ability: number): boolean {
    return this.set(`unit_${slot}`, 1 + MOVE_TARGETS + ability);
  }

  setProduction(slot: number, itemIndex: number): boolean {
    return this.set(`city_prod_${slot}`, itemIndex);
  }

  setResearch(techIndex: number): boolean {
    return this.set("research", 1 + techIndex);
  }

  setPolicy(policyIndex: number): boolean {
    return this.set("policy", 1 + policyIndex);
  }

  setCongressVote(candidate: number): boolean {
    return this.set("congress_vote", 1 + candidate);
  }

  congressVoteOpen(): boolean {
    return this.legalIndices("congress_vote").length > 1;
  }

  /** The flat composite action; untouched sub-spaces are passes. */
  build(): number[] {
    return [...this.flat];
  }

  /** Sub-spaces where the echoed selection differs from what was sent. */
  diffEcho(selected: number[]): Array<{ name: string; sent: number; executed: number }> {
    const out: Array<{ name: string; sent: number; executed: number }> = [];
    this.flat.forEach((sent, k) => {
      if (selected[k] !== sent) {
        out.push({ name: this.layout[k].name, sent, executed: selected[k] });
      }
    });
    return out;
  }
}
