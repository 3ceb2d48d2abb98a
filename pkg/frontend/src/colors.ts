/** Canonical tactic sequence; color hue follows the index. */
export const TACTIC_ORDER = [
  "InitialAccess",
  "Execution",
  "Persistence",
  "PrivilegeEscalation",
  "DefenseEvasion",
  "CredentialAccess",
  "Discovery",
  "LateralMovement",
  "Collection",
  "CommandAndControl",
  "Exfiltration",
  "Impact",
] as const;

export function tacticIndex(tactic: string): number {
  const i = TACTIC_ORDER.indexOf(tactic as (typeof TACTIC_ORDER)[number]);
  return i >= 0 ? i : TACTIC_ORDER.length;
}

export function tacticColor(tactic: string): string {
  const i = tacticIndex(tactic);
  const hue = Math.round((i / TACTIC_ORDER.length) * 300); // red .. violet
  return `hsl(${hue} 70% 55%)`;
}

export function sortTactics(tactics: string[]): string[] {
  return [...tactics].sort((a, b) => tacticIndex(a) - tacticIndex(b));
}
