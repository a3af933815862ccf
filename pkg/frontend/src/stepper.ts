/**
 * Stepper state for one assessment.  Pure functions over the served
 * assessment plus a local set of steps the assessor explicitly marked
 * unknown; the engine on the server is the only thing that ever decides.
 *
 * Mirrors the engine's short-circuits: a decisive ownership settles the
 * pair at step 1 and a core-curriculum mandate at step 2, so the remaining
 * screens are skipped and the console jumps straight to commit.
 */

import type { Assessment, Dossier } from './types.js';
import { TERMINAL_OWNERSHIP } from './types.js';

export type StepId = 1 | 2 | 3 | 'decided';

/** Steps the assessor explicitly marked unknown in this session. */
export type AckSet = ReadonlySet<1 | 2 | 3>;

export function terminalStep(dossier: Dossier): 1 | 2 | null {
  if (TERMINAL_OWNERSHIP.has(dossier.ownership)) return 1;
  if (dossier.mandate === 'core_curriculum') return 2;
  return null;
}

export function stepSettled(dossier: Dossier, acks: AckSet, step: 1 | 2 | 3): boolean {
  if (step === 1) return dossier.ownership !== 'unknown' || acks.has(1);
  if (step === 2) return dossier.mandate !== 'unknown' || acks.has(2);
  return dossier.colocation_share !== null || dossier.author_overlap !== null || acks.has(3);
}

/**
 * Where the stepper stands.  Terminal evidence pins the stepper at the
 * terminal step (commit is offered there); otherwise the first unsettled
 * step is current, and a fully settled dossier sits at step 3 awaiting
 * commit.
 */
export function currentStep(assessment: Assessment, acks: AckSet): StepId {
  if (assessment.classification !== null) return 'decided';
  const terminal = terminalStep(assessment.dossier);
  if (terminal !== null) return terminal;
  for (const step of [1, 2, 3] as const) {
    if (!stepSettled(assessment.dossier, acks, step)) return step;
  }
  return 3;
}

export function commitReady(assessment: Assessment, acks: AckSet): boolean {
  if (assessment.classification !== null) return false;
  if (terminalStep(assessment.dossier) !== null) return true;
  return ([1, 2, 3] as const).every((step) => stepSettled(assessment.dossier, acks, step));
}

/** Terminal evidence means the engine will return component; show that. */
export function verdictPreview(dossier: Dossier): 'component' | null {
  return terminalStep(dossier) !== null ? 'component' : null;
}

/**
 * Client-side preview of the overlap fraction while toggles are being
 * flipped.  Display only: the service recomputes the fraction from the
 * recorded verdicts on save.
 */
export function overlapPreview(verdicts: ReadonlyMap<string, boolean>): string | null {
  if (verdicts.size === 0) return null;
  let yes = 0;
  for (const flag of verdicts.values()) if (flag) yes += 1;
  return (yes / verdicts.size).toFixed(2);
}
