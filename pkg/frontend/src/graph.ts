/**
 * Client-side scene graph model.
 *
 * Mirrors the service's tree rules exactly so the editor can never queue
 * an edit the service would reject: three fixed roots, four relation
 * types, single parent per node, no cycles. Graphs travel as nested JSON
 * ("label -> relation -> [ {child} ]") and are manipulated here as an
 * ordered edge list.
 */

export const RELATIONS = ["support", "contain", "hang", "attach"] as const;
export type Relation = (typeof RELATIONS)[number];

export const ROOTS = ["ceiling", "wall", "floor"] as const;
export type RootLabel = (typeof ROOTS)[number];

export type NodeBody = { [relation: string]: Array<{ [label: string]: NodeBody }> };
export type GraphDoc = { [root: string]: NodeBody };

export interface Triple {
  parent: string;
  relation: Relation;
  child: string;
}

export type CorrectionOp =
  | { op: "add_relation"; parent: string; relation: Relation; child: string }
  | { op: "remove_relation"; parent: string; child: string }
  | { op: "move_subtree"; child: string; new_parent: string; relation: Relation }
  | { op: "rename"; old: string; new: string }
  | { op: "set_relation"; parent: string; child: string; relation: Relation };

export class GraphEditError extends Error {}

export function isRelation(value: string): value is Relation {
  return (RELATIONS as readonly string[]).includes(value);
}

function isRoot(label: string): boolean {
  return (ROOTS as readonly string[]).includes(label);
}

/** Flatten a graph document into edges, depth-first in document order. */
export function toTriples(doc: GraphDoc): Triple[] {
  const triples: Triple[] = [];
  const walk = (label: string, body: NodeBody) => {
    for (const [relation, entries] of Object.entries(body ?? {})) {
      if (!isRelation(relation)) {
        throw new GraphEditError(`unknown relation "${relation}" under "${label}"`);
      }
      for (const entry of entries) {
        const keys = Object.keys(entry);
        if (keys.length !== 1) {
          throw new GraphEditError(`child entries under "${label}" must have one key`);
        }
        const child = keys[0]!;
        triples.push({ parent: label, relation, child });
        walk(child, entry[child]!);
      }
    }
  };
  for (const root of ROOTS) {
    walk(root, doc[root] ?? {});
  }
  return triples;
}

export function labelsOf(triples: Triple[]): Set<string> {
  const labels = new Set<string>(ROOTS);
  for (const t of triples) {
    labels.add(t.parent);
    labels.add(t.child);
  }
  return labels;
}

function descendants(triples: Triple[], label: string): Set<string> {
  const children = new Map<string, string[]>();
  for (const t of triples) {
    const bucket = children.get(t.parent) ?? [];
    bucket.push(t.child);
    children.set(t.parent, bucket);
  }
  const out = new Set<string>();
  const stack = [label];
  while (stack.length) {
    for (const child of children.get(stack.pop()!) ?? []) {
      if (!out.has(child)) {
        out.add(child);
        stack.push(child);
      }
    }
  }
  return out;
}

/** Rebuild the nested document: canonical relation order, insertion order kept. */
export function toDoc(triples: Triple[]): GraphDoc {
  const children = new Map<string, Array<{ relation: Relation; child: string }>>();
  const parentCount = new Map<string, number>();
  for (const t of triples) {
    const bucket = children.get(t.parent) ?? [];
    bucket.push({ relation: t.relation, child: t.child });
    children.set(t.parent, bucket);
    parentCount.set(t.child, (parentCount.get(t.child) ?? 0) + 1);
    if (parentCount.get(t.child)! > 1) {
      throw new GraphEditError(`"${t.child}" has more than one parent`);
    }
  }
  for (const root of ROOTS) {
    if (parentCount.has(root)) {
      throw new GraphEditError(`root "${root}" cannot have a parent`);
    }
  }
  const building = new Set<string>();
  const body = (label: string): NodeBody => {
    if (building.has(label)) {
      throw new GraphEditError(`cycle through "${label}"`);
    }
    building.add(label);
    const grouped: NodeBody = {};
    const mine = children.get(label) ?? [];
    for (const relation of RELATIONS) {
      for (const entry of mine) {
        if (entry.relation !== relation) continue;
        (grouped[relation] ??= []).push({ [entry.child]: body(entry.child) });
      }
    }
    building.delete(label);
    return grouped;
  };
  const doc: GraphDoc = {};
  for (const root of ROOTS) {
    doc[root] = body(root);
  }
  const reachable = labelsOf(toTriples(doc));
  for (const label of children.keys()) {
    if (!reachable.has(label)) {
      throw new GraphEditError(`edges unreachable from roots via "${label}"`);
    }
  }
  return doc;
}

/** Apply correction ops in order; throws GraphEditError on any tree violation. */
export function applyOps(base: Triple[], ops: CorrectionOp[]): Triple[] {
  let triples = base.slice();
  for (const op of ops) {
    const labels = labelsOf(triples);
    switch (op.op) {
      case "add_relation": {
        if (!isRelation(op.relation)) throw new GraphEditError(`unknown relation "${op.relation}"`);
        if (!labels.has(op.parent)) throw new GraphEditError(`unknown parent "${op.parent}"`);
        if (labels.has(op.child)) {
          throw new GraphEditError(`"${op.child}" already has a parent (tree violated)`);
        }
        if (!op.child.trim()) throw new GraphEditError("empty label");
        triples.push({ parent: op.parent, relation: op.relation, child: op.child });
        break;
      }
      case "remove_relation": {
        const edge = triples.find((t) => t.parent === op.parent && t.child === op.child);
        if (!edge) throw new GraphEditError(`no edge "${op.parent}" -> "${op.child}"`);
        const doomed = descendants(triples, op.child);
        doomed.add(op.child);
        triples = triples.filter((t) => !doomed.has(t.child));
        break;
      }
      case "move_subtree": {
        if (!isRelation(op.relation)) throw new GraphEditError(`unknown relation "${op.relation}"`);
        if (isRoot(op.child)) throw new GraphEditError("cannot move a root");
        if (!labels.has(op.new_parent)) {
          throw new GraphEditError(`unknown parent "${op.new_parent}"`);
        }
        if (op.new_parent === op.child || descendants(triples, op.child).has(op.new_parent)) {
          throw new GraphEditError("new parent is inside the moved subtree");
        }
        const index = triples.findIndex((t) => t.child === op.child);
        if (index < 0) throw new GraphEditError(`unknown node "${op.child}"`);
        triples.splice(index, 1);
        triples.push({ parent: op.new_parent, relation: op.relation, child: op.child });
        break;
      }
      case "rename": {
        if (isRoot(op.old)) throw new GraphEditError("cannot rename a root");
        if (!labels.has(op.old)) throw new GraphEditError(`unknown node "${op.old}"`);
        if (!op.new.trim()) throw new GraphEditError("empty new label");
        if (labels.has(op.new)) throw new GraphEditError(`"${op.new}" already exists`);
        triples = triples.map((t) => ({
          parent: t.parent === op.old ? op.new : t.parent,
          relation: t.relation,
          child: t.child === op.old ? op.new : t.child,
        }));
        break;
      }
      case "set_relation": {
        if (!isRelation(op.relation)) throw new GraphEditError(`unknown relation "${op.relation}"`);
        const index = triples.findIndex((t) => t.parent === op.parent && t.child === op.child);
        if (index < 0) throw new GraphEditError(`no edge "${op.parent}" -> "${op.child}"`);
        triples[index] = { parent: op.parent, relation: op.relation, child: op.child };
        break;
      }
      default: {
        const bad: never = op;
        throw new GraphEditError(`unknown op ${JSON.stringify(bad)}`);
      }
    }
  }
  toDoc(triples); // full tree validation
  return triples;
}

/** Set-style key for diffing two edge lists. */
export function tripleKey(t: Triple): string {
  return JSON.stringify([t.parent, t.relation, t.child]);
}

export function tripleDiff(before: Triple[], after: Triple[]): {
  removed: Triple[];
  added: Triple[];
} {
  const beforeKeys = new Set(before.map(tripleKey));
  const afterKeys = new Set(after.map(tripleKey));
  return {
    removed: before.filter((t) => !afterKeys.has(tripleKey(t))),
    added: after.filter((t) => !beforeKeys.has(tripleKey(t))),
  };
}
