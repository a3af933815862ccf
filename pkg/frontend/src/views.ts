/**
 * HTML renderers.  Pure string builders: state in, markup out, no DOM
 * access, so they are testable without a browser.  Interactive elements
 * carry data-action attributes picked up by the controller's delegated
 * listener.
 */

import type {
  Assessment,
  Classification,
  Dossier,
  Mandate,
  Ownership,
  QueueEntry,
  SampledPublication,
  StepOutcome,
  WhatifResponse,
} from './types.js';
import { TERMINAL_OWNERSHIP } from './types.js';
import type { AckSet, StepId } from './stepper.js';
import { commitReady, stepSettled, terminalStep, verdictPreview } from './stepper.js';

export const escapeHtml = (value: unknown): string =>
  String(value ?? '')
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');

export const escapeAttr = escapeHtml;

export const OWNERSHIP_OPTIONS: ReadonlyArray<{ value: Ownership; label: string }> = [
  { value: 'university', label: 'Owned by the university' },
  { value: 'university_related_foundation', label: 'Owned by a university-related foundation' },
  { value: 'university_health_system', label: "Part of the university's health system" },
  { value: 'reverse_ownership', label: 'Reverse ownership (hospital side owns)' },
  { value: 'government_health_authority', label: 'Run by a government health authority' },
  { value: 'independent_foundation', label: 'Independent foundation' },
  { value: 'private', label: 'Privately owned' },
  { value: 'unknown', label: 'Unknown' },
];

export const MANDATE_OPTIONS: ReadonlyArray<{ value: Mandate; label: string }> = [
  { value: 'core_curriculum', label: 'Hosts the core medical curriculum' },
  { value: 'specialist_or_continuing_only', label: 'Specialist or continuing education only' },
  { value: 'patient_education_only', label: 'Patient education only' },
  { value: 'none_documented', label: 'No educational mandate documented' },
  { value: 'unknown', label: 'Unknown' },
];

const STATUS_LABEL: Record<string, string> = {
  pending: 'pending',
  in_progress: 'in progress',
  decided: 'decided',
};

export function renderBanner(kind: 'error' | 'conflict' | 'info', message: string): string {
  const action =
    kind === 'conflict'
      ? '<button type="button" data-action="reload">Reload assessment</button>'
      : '';
  return `<div class="banner banner-${kind}" role="alert">${escapeHtml(message)}${action}</div>`;
}

export function renderQueue(entries: QueueEntry[], active: string | null): string {
  if (entries.length === 0) {
    return '<p class="queue-empty">No hospitals above the assessment threshold.</p>';
  }
  const rows = entries
    .map((entry) => {
      const cls = entry.hospital === active ? ' class="active"' : '';
      return `<tr${cls} data-action="open" data-hospital="${escapeAttr(entry.hospital)}">
  <td>${escapeHtml(entry.label)}</td>
  <td class="num">${escapeHtml(entry.standalone_output)}</td>
  <td><span class="badge badge-${escapeAttr(entry.status)}">${escapeHtml(
        STATUS_LABEL[entry.status] ?? entry.status,
      )}</span></td>
</tr>`;
    })
    .join('\n');
  return `<table class="queue">
<thead><tr><th>Hospital</th><th>Output</th><th>Status</th></tr></thead>
<tbody>
${rows}
</tbody>
</table>`;
}

function sourceField(field: string, citation: string): string {
  return `<label class="source-field">Source
  <input type="text" data-citation="${escapeAttr(field)}" value="${escapeAttr(citation)}"
         placeholder="where this was found (required)">
</label>`;
}

function inlineError(field: string, errors: ReadonlyMap<string, string>): string {
  const message = errors.get(field);
  if (!message) return '';
  return `<p class="field-error" data-error-for="${escapeAttr(field)}">${escapeHtml(message)}</p>`;
}

export interface StepperDraft {
  ownership: Ownership;
  mandate: Mandate;
  ownershipCitation: string;
  mandateCitation: string;
  colocation: string;
  colocationCitation: string;
  sampleN: string;
  sampleSeed: string;
}

export function emptyDraft(dossier: Dossier): StepperDraft {
  return {
    ownership: dossier.ownership,
    mandate: dossier.mandate,
    ownershipCitation: '',
    mandateCitation: '',
    colocation: dossier.colocation_share === null ? '' : String(dossier.colocation_share),
    colocationCitation: '',
    sampleN: '25',
    sampleSeed: '1',
  };
}

function radioGroup<T extends string>(
  name: string,
  options: ReadonlyArray<{ value: T; label: string }>,
  selected: T,
): string {
  return options
    .map(
      (opt) => `<label class="pick"><input type="radio" name="${escapeAttr(name)}"
  value="${escapeAttr(opt.value)}"${opt.value === selected ? ' checked' : ''}>
  <span>${escapeHtml(opt.label)}</span></label>`,
    )
    .join('\n');
}

function renderTerminalNote(step: 1 | 2): string {
  const skipped = step === 1 ? 'Steps 2 and 3 are' : 'Step 3 is';
  return `<div class="terminal-note">
  <strong>Component</strong> — this evidence settles the pair outright. ${skipped} skipped; commit below.
</div>`;
}

export function renderStepOne(
  draft: StepperDraft,
  errors: ReadonlyMap<string, string>,
): string {
  const preview = TERMINAL_OWNERSHIP.has(draft.ownership) ? renderTerminalNote(1) : '';
  return `<section class="step" data-step="1">
<h3>Step 1 — Legal ownership</h3>
${radioGroup('ownership', OWNERSHIP_OPTIONS, draft.ownership)}
${sourceField('ownership', draft.ownershipCitation)}
${inlineError('ownership', errors)}
${preview}
<div class="step-actions">
  <button type="button" data-action="save-ownership">Save ownership</button>
  <button type="button" data-action="mark-unknown" data-step="1">Mark unknown and continue</button>
</div>
</section>`;
}

export function renderStepTwo(
  draft: StepperDraft,
  errors: ReadonlyMap<string, string>,
): string {
  const preview = draft.mandate === 'core_curriculum' ? renderTerminalNote(2) : '';
  return `<section class="step" data-step="2">
<h3>Step 2 — Educational mandate</h3>
${radioGroup('mandate', MANDATE_OPTIONS, draft.mandate)}
${sourceField('mandate', draft.mandateCitation)}
${inlineError('mandate', errors)}
${preview}
<div class="step-actions">
  <button type="button" data-action="save-mandate">Save mandate</button>
  <button type="button" data-action="mark-unknown" data-step="2">Mark unknown and continue</button>
</div>
</section>`;
}

export function renderSampleTable(
  publications: SampledPublication[],
  verdicts: ReadonlyMap<string, boolean>,
  preview: string | null,
): string {
  if (publications.length === 0) {
    return '<p class="sample-empty">No sample drawn yet.</p>';
  }
  const rows = publications
    .map((pub) => {
      const flag = verdicts.get(pub.id);
      return `<tr data-pub="${escapeAttr(pub.id)}">
  <td>${escapeHtml(pub.id)}</td>
  <td>${escapeHtml(pub.year)}</td>
  <td>${escapeHtml(pub.doctype)}</td>
  <td class="addresses">${pub.addresses.map((a) => escapeHtml(a)).join('<br>')}</td>
  <td>
    <label><input type="radio" name="verdict-${escapeAttr(pub.id)}" value="yes"${
        flag === true ? ' checked' : ''
      } data-action="toggle-verdict"> yes</label>
    <label><input type="radio" name="verdict-${escapeAttr(pub.id)}" value="no"${
        flag === false ? ' checked' : ''
      } data-action="toggle-verdict"> no</label>
  </td>
</tr>`;
    })
    .join('\n');
  const previewHtml =
    preview === null
      ? ''
      : `<p class="overlap-preview">Overlap so far: <strong data-role="overlap-preview">${escapeHtml(
          preview,
        )}</strong> (service recomputes on save)</p>`;
  return `<table class="sample">
<thead><tr><th>ID</th><th>Year</th><th>Type</th><th>Addresses</th><th>University faculty author?</th></tr></thead>
<tbody>
${rows}
</tbody>
</table>
${previewHtml}`;
}

export function renderStepThree(
  dossier: Dossier,
  draft: StepperDraft,
  publications: SampledPublication[],
  verdicts: ReadonlyMap<string, boolean>,
  overlapPreviewText: string | null,
  errors: ReadonlyMap<string, string>,
): string {
  const recorded = dossier.author_overlap;
  const recordedHtml = recorded
    ? `<p class="recorded-overlap">Recorded overlap: ${escapeHtml(recorded.fraction)} over ${escapeHtml(
        recorded.sample_size,
      )} publications.</p>`
    : '';
  return `<section class="step" data-step="3">
<h3>Step 3 — Integration</h3>
<div class="colocation">
  <label>Share of hospital publications naming the university campus address
    <input type="number" min="0" max="1" step="0.01" data-role="colocation"
           value="${escapeAttr(draft.colocation)}">
  </label>
  ${sourceField('colocation_share', draft.colocationCitation)}
  ${inlineError('colocation_share', errors)}
  <button type="button" data-action="save-colocation">Save co-location share</button>
</div>
<div class="sampling">
  <h4>Author check on hospital-only publications</h4>
  <label>Sample size <input type="number" min="1" data-role="sample-n" value="${escapeAttr(
    draft.sampleN,
  )}"></label>
  <label>Seed <input type="number" data-role="sample-seed" value="${escapeAttr(
    draft.sampleSeed,
  )}"></label>
  <button type="button" data-action="draw-sample">Draw sample</button>
  ${inlineError('sample', errors)}
  ${renderSampleTable(publications, verdicts, overlapPreviewText)}
  <button type="button" data-action="save-verdicts"${
    verdicts.size === 0 ? ' disabled' : ''
  }>Save verdicts</button>
  ${inlineError('verdicts', errors)}
  ${recordedHtml}
</div>
<div class="step-actions">
  <button type="button" data-action="mark-unknown" data-step="3">Mark unknown</button>
</div>
</section>`;
}

export function renderTrail(trail: StepOutcome[]): string {
  const items = trail
    .map(
      (outcome) => `<li data-step="${escapeAttr(outcome.step)}">
  <span class="trail-step">Step ${escapeHtml(outcome.step)}</span>
  <span class="trail-verdict trail-${escapeAttr(outcome.verdict)}">${escapeHtml(outcome.verdict)}</span>
  <span class="trail-rationale">${escapeHtml(outcome.rationale)}</span>
</li>`,
    )
    .join('\n');
  return `<ol class="trail">
${items}
</ol>`;
}

export function renderDecided(
  classification: Classification,
  errors: ReadonlyMap<string, string>,
): string {
  const effective = classification.override
    ? classification.override.verdict
    : classification.verdict;
  const overrideHtml = classification.override
    ? `<p class="override-note">Overridden to <strong>${escapeHtml(
        classification.override.verdict,
      )}</strong> by ${escapeHtml(classification.override.assessor)}: ${escapeHtml(
        classification.override.justification,
      )}</p>`
    : `<form class="override-form" data-role="override-form">
  <h4>Override</h4>
  <label><input type="radio" name="override-verdict" value="component"> component</label>
  <label><input type="radio" name="override-verdict" value="associate"> associate</label>
  <label>Justification <textarea data-role="override-justification"></textarea></label>
  ${inlineError('override', errors)}
  <button type="button" data-action="apply-override">Apply override</button>
</form>`;
  return `<section class="decided">
<h3>Decided: <span class="verdict verdict-${escapeAttr(effective)}">${escapeHtml(effective)}</span></h3>
<p>Assessed by ${escapeHtml(classification.assessor)} at ${escapeHtml(classification.decided_at)}.</p>
${renderTrail(classification.trail)}
${overrideHtml}
</section>`;
}

function stepDot(step: 1 | 2 | 3, current: StepId, settled: boolean, skipped: boolean): string {
  const classes = ['dot'];
  if (current === step) classes.push('current');
  if (settled) classes.push('settled');
  if (skipped) classes.push('skipped');
  return `<span class="${classes.join(' ')}">${step}</span>`;
}

export function renderStepper(
  assessment: Assessment,
  current: StepId,
  acks: AckSet,
  draft: StepperDraft,
  publications: SampledPublication[],
  verdicts: ReadonlyMap<string, boolean>,
  overlapPreviewText: string | null,
  errors: ReadonlyMap<string, string>,
): string {
  const dossier = assessment.dossier;
  const terminal = terminalStep(dossier);
  const header = `<header class="stepper-head">
<h2>${escapeHtml(dossier.hospital)} ~ ${escapeHtml(dossier.university)}</h2>
<p>Window ${escapeHtml(assessment.window[0])}:${escapeHtml(assessment.window[1])} ·
   version ${escapeHtml(assessment.version)} · ${escapeHtml(STATUS_LABEL[assessment.status] ?? assessment.status)}</p>
<div class="dots">
${stepDot(1, current, stepSettled(dossier, acks, 1), false)}
${stepDot(2, current, stepSettled(dossier, acks, 2), terminal === 1)}
${stepDot(3, current, stepSettled(dossier, acks, 3), terminal !== null)}
</div>
</header>`;

  if (current === 'decided' && assessment.classification) {
    return header + renderDecided(assessment.classification, errors);
  }

  let panel = '';
  if (current === 1) panel = renderStepOne(draft, errors);
  else if (current === 2) panel = renderStepTwo(draft, errors);
  else {
    panel = renderStepThree(
      dossier,
      draft,
      publications,
      verdicts,
      overlapPreviewText,
      errors,
    );
  }

  const preview = verdictPreview(dossier);
  const previewHtml =
    preview && terminal !== null
      ? renderTerminalNote(terminal)
      : '';
  const commitHtml = commitReady(assessment, acks)
    ? `<div class="commit">
${previewHtml}
${inlineError('commit', errors)}
<button type="button" data-action="classify">Commit classification</button>
</div>`
    : '';
  return header + panel + commitHtml;
}

export function renderWhatif(data: WhatifResponse | null, stale: boolean): string {
  if (data === null) {
    return '<aside class="whatif"><p class="whatif-empty">No pair loaded.</p></aside>';
  }
  const staleHtml = stale
    ? '<span class="badge badge-stale">stale — service unreachable</span>'
    : '';
  const branch = (title: string, figures: WhatifResponse['component']): string => `<div class="branch">
<h4>${escapeHtml(title)}</h4>
<dl>
  <dt>Separate</dt><dd data-figure="separate">${escapeHtml(figures.separate)}</dd>
  <dt>Marginal</dt><dd data-figure="marginal">${escapeHtml(figures.marginal)}</dd>
  <dt>Combined</dt><dd data-figure="combined">${escapeHtml(figures.combined)}</dd>
  <dt>Share %</dt><dd data-figure="pct_share">${escapeHtml(figures.pct_share)}</dd>
</dl>
</div>`;
  return `<aside class="whatif">
<h3>What-if ${staleHtml}</h3>
<p>${escapeHtml(data.university_label)} + ${escapeHtml(data.hospital_label)} ·
   ${escapeHtml(data.scheme)} · ${escapeHtml(data.window)}</p>
<div class="branches">
${branch('If component', data.component)}
${branch('If associate', data.associate)}
</div>
</aside>`;
}
