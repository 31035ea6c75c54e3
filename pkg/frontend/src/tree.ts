// Parsing and rendering of the procedure text encoding:
// leaf = "L(bits)", node = "P{1,2}[negativeChild,positiveChild]".

export interface TreeNode {
  kind: "leaf" | "node";
  outcome?: string;
  pool?: number[];
  neg?: TreeNode;
  pos?: TreeNode;
}

export function parseProcedure(text: string): TreeNode {
  let pos = 0;

  function fail(message: string): never {
    throw new Error(`${message} at position ${pos} in ${JSON.stringify(text)}`);
  }

  function expect(token: string): void {
    if (!text.startsWith(token, pos)) fail(`expected ${JSON.stringify(token)}`);
    pos += token.length;
  }

  function takeWhile(allowed: RegExp): string {
    const start = pos;
    while (pos < text.length && allowed.test(text[pos])) pos += 1;
    return text.slice(start, pos);
  }

  function parseTree(): TreeNode {
    if (text.startsWith("L(", pos)) {
      pos += 2;
      const bits = takeWhile(/[01]/);
      if (!bits) fail("expected outcome bits");
      expect(")");
      return { kind: "leaf", outcome: bits };
    }
    if (text.startsWith("P{", pos)) {
      pos += 2;
      const members: number[] = [];
      for (;;) {
        const digits = takeWhile(/[0-9]/);
        if (!digits) fail("expected sample index");
        members.push(parseInt(digits, 10));
        if (text.startsWith(",", pos)) {
          pos += 1;
          continue;
        }
        break;
      }
      expect("}");
      expect("[");
      const neg = parseTree();
      expect(",");
      const posChild = parseTree();
      expect("]");
      return { kind: "node", pool: members, neg, pos: posChild };
    }
    fail("expected 'L(' or 'P{'");
  }

  const tree = parseTree();
  if (pos !== text.length) fail("trailing characters");
  return tree;
}

export function leafOutcomes(tree: TreeNode): string[] {
  if (tree.kind === "leaf") return [tree.outcome!];
  return [...leafOutcomes(tree.neg!), ...leafOutcomes(tree.pos!)];
}

export type SampleStatus = "unknown" | "clean" | "infected";

/** Statuses already decided by the surviving outcomes: a sample is known
 * clean (or infected) when every leaf of the remaining tree agrees. */
export function sampleStatuses(tree: TreeNode, n: number): SampleStatus[] {
  const leaves = leafOutcomes(tree);
  const statuses: SampleStatus[] = [];
  for (let i = 0; i < n; i += 1) {
    const bits = new Set(leaves.map((leaf) => leaf[i]));
    if (bits.size === 1) {
      statuses.push(bits.has("1") ? "infected" : "clean");
    } else {
      statuses.push("unknown");
    }
  }
  return statuses;
}

function escapeHtml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Collapsible node-link rendering; the negative branch comes first. */
export function renderTreeHtml(tree: TreeNode): string {
  if (tree.kind === "leaf") {
    return `<span class="tree-leaf" title="infection status vector">${escapeHtml(tree.outcome!)}</span>`;
  }
  const pool = `{${tree.pool!.join(",")}}`;
  return (
    `<details class="tree-node" open>` +
    `<summary><span class="tree-pool">pool ${escapeHtml(pool)}</span></summary>` +
    `<ul>` +
    `<li><span class="branch-tag">negative</span> ${renderTreeHtml(tree.neg!)}</li>` +
    `<li><span class="branch-tag positive">positive</span> ${renderTreeHtml(tree.pos!)}</li>` +
    `</ul></details>`
  );
}
