import type { Manifest } from "./types.js";

export interface ViewState {
  firstRun: boolean;
  workspaceVisible: boolean;
  inputDisabled: boolean;
  placeholder: string;
}

/** Which model should be selected after the installed list changes:
 * keep the previous choice if it still exists, otherwise fall back to the
 * first installed model, otherwise nothing. */
export function nextSelection(installed: Manifest[], previous: string | null): string | null {
  if (previous !== null && installed.some((m) => m.id === previous)) return previous;
  return installed.length > 0 ? installed[0]!.id : null;
}

export function deriveViewState(installed: Manifest[], selected: string | null): ViewState {
  const hasModels = installed.length > 0;
  const hasSelection = selected !== null;
  return {
    firstRun: !hasModels,
    workspaceVisible: hasModels,
    inputDisabled: !hasSelection,
    placeholder: hasSelection
      ? "Type to translate…"
      : "Install a model to start translating",
  };
}
