/**
 * Scenario form model with the submission invariants enforced client-side:
 * two distinct branches required, slider ranges clamped.  All validation
 * here is about form usability; the advisor re-validates on its side.
 */

export const LOADING_RANGE = { min: 0.9, max: 1.8, step: 0.1 } as const;
export const WIND_RANGE = { min: 0.0, max: 0.7, step: 0.1 } as const;
export const POLICIES = ["exp1", "exp2", "exp3"] as const;
export type PolicyName = (typeof POLICIES)[number];

export interface ScenarioForm {
  caseId: string;
  branchA: number | null;
  branchB: number | null;
  loadingMultiplier: number;
  windFraction: number;
  windReduction: number;
  policy: PolicyName;
}

export function defaultForm(caseId = "ieee30"): ScenarioForm {
  return {
    caseId,
    branchA: null,
    branchB: null,
    loadingMultiplier: 1.0,
    windFraction: 0.0,
    windReduction: 0.0,
    policy: "exp1",
  };
}

function clamp(value: number, min: number, max: number): number {
  return Math.min(max, Math.max(min, value));
}

export function setLoading(form: ScenarioForm, value: number): ScenarioForm {
  return { ...form, loadingMultiplier: clamp(value, LOADING_RANGE.min, LOADING_RANGE.max) };
}

export function setWindFraction(form: ScenarioForm, value: number): ScenarioForm {
  return { ...form, windFraction: clamp(value, WIND_RANGE.min, WIND_RANGE.max) };
}

export function setWindReduction(form: ScenarioForm, value: number): ScenarioForm {
  return { ...form, windReduction: clamp(value, WIND_RANGE.min, WIND_RANGE.max) };
}

export interface FormCheck {
  ok: boolean;
  problems: string[];
}

export function checkForm(form: ScenarioForm): FormCheck {
  const problems: string[] = [];
  if (form.branchA === null || form.branchB === null) {
    problems.push("select two branches for the initial contingency");
  } else if (form.branchA === form.branchB) {
    problems.push("the two contingency branches must be distinct");
  }
  if (form.windReduction > form.windFraction) {
    problems.push("wind reduction cannot exceed the wind fraction");
  }
  return { ok: problems.length === 0, problems };
}

/** Request body for POST /simulate; only valid forms convert. */
export function toScenarioRequest(form: ScenarioForm) {
  const check = checkForm(form);
  if (!check.ok) throw new Error(check.problems.join("; "));
  return {
    case: form.caseId,
    loading_multiplier: form.loadingMultiplier,
    wind_fraction: form.windFraction,
    wind_reduction: form.windReduction,
    initial_contingencies: [form.branchA as number, form.branchB as number],
    policy: form.policy,
  };
}

/** Request body for POST /whatif over a Δw grid. */
export function toWhatIfRequest(form: ScenarioForm, policies: PolicyName[], grid: number[]) {
  const check = checkForm(form);
  if (!check.ok) throw new Error(check.problems.join("; "));
  return {
    case: form.caseId,
    loading_multiplier: form.loadingMultiplier,
    wind_fraction: form.windFraction,
    initial_contingencies: [form.branchA as number, form.branchB as number],
    policies,
    grid,
  };
}
