/**
 * Viewer state machine: API key + place in, rendered figure out.
 *
 * Pure state transitions, independent of the DOM and the plotting
 * library, so the whole flow is unit-testable with a mocked fetch.
 */

export const LAYER_NAMES = ["Terrain", "Buildings", "Roads", "Power lines"] as const;
export type LayerName = (typeof LAYER_NAMES)[number];

export interface FigureDoc {
  data: Array<{ name?: string; [key: string]: unknown }>;
  layout?: Record<string, unknown>;
}

export interface ApiError {
  status: number;
  stage: string;
  message: string;
}

export type Status =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "error"; message: string; stage?: string }
  | { kind: "ready" };

export interface ViewerState {
  apiKey: string;
  place: string;
  baseUrl: string;
  figure: FigureDoc | null;
  figureRaw: string | null; // exact response body, exported byte-for-byte
  layerVisibility: Record<LayerName, boolean>;
  status: Status;
  statsLine: string | null;
}

export function initialState(baseUrl = ""): ViewerState {
  return {
    apiKey: "",
    place: "",
    baseUrl,
    figure: null,
    figureRaw: null,
    layerVisibility: {
      Terrain: true,
      Buildings: true,
      Roads: true,
      "Power lines": true,
    },
    status: { kind: "idle" },
    statsLine: null,
  };
}

export function canSubmit(state: ViewerState): boolean {
  return (
    state.status.kind !== "loading" &&
    state.apiKey.trim().length > 0 &&
    state.place.trim().length > 0
  );
}

export function requestUrl(state: ViewerState): string {
  const base = state.baseUrl.replace(/\/+$/, "");
  return `${base}/${encodeURIComponent(state.apiKey)}/${encodeURIComponent(state.place)}`;
}

/** Start a submit: only valid from a non-loading state with both inputs. */
export function beginSubmit(state: ViewerState): ViewerState {
  if (!canSubmit(state)) {
    return state;
  }
  return { ...state, status: { kind: "loading" }, statsLine: null };
}

export function submitSucceeded(state: ViewerState, raw: string, statsLine: string | null): ViewerState {
  let figure: FigureDoc;
  try {
    figure = JSON.parse(raw) as FigureDoc;
  } catch {
    return submitFailed(state, "response was not valid JSON");
  }
  if (!figure || !Array.isArray(figure.data)) {
    return submitFailed(state, "response is not a figure document");
  }
  return {
    ...state,
    figure,
    figureRaw: raw,
    status: { kind: "ready" },
    statsLine,
    layerVisibility: {
      Terrain: true,
      Buildings: true,
      Roads: true,
      "Power lines": true,
    },
  };
}

export function submitFailed(state: ViewerState, message: string, stage?: string): ViewerState {
  return { ...state, figure: null, figureRaw: null, status: { kind: "error", message, stage } };
}

/** Flip one layer; unknown names and non-ready states are no-ops. */
export function toggleLayer(state: ViewerState, name: string): ViewerState {
  if (state.status.kind !== "ready") {
    return state;
  }
  if (!(LAYER_NAMES as readonly string[]).includes(name)) {
    return state;
  }
  const layer = name as LayerName;
  return {
    ...state,
    layerVisibility: {
      ...state.layerVisibility,
      [layer]: !state.layerVisibility[layer],
    },
  };
}

/** Per-trace visibility flags in figure trace order. */
export function traceVisibility(state: ViewerState): boolean[] {
  if (!state.figure) {
    return [];
  }
  return state.figure.data.map((trace) => {
    const name = trace.name as LayerName | undefined;
    if (name !== undefined && name in state.layerVisibility) {
      return state.layerVisibility[name];
    }
    return true;
  });
}

/** Fetch the figure for the current inputs through the provided fetch. */
export async function submit(
  state: ViewerState,
  fetchFn: typeof fetch = fetch,
): Promise<ViewerState> {
  const loading = beginSubmit(state);
  if (loading.status.kind !== "loading") {
    return state;
  }
  let response: Response;
  try {
    response = await fetchFn(requestUrl(state));
  } catch (e) {
    return submitFailed(loading, `network failure: ${String(e)}`);
  }
  const body = await response.text();
  if (!response.ok) {
    let stage: string | undefined;
    let message = `request failed with status ${response.status}`;
    try {
      const err = JSON.parse(body) as ApiError;
      if (err.message) {
        message = err.message;
      }
      stage = err.stage;
    } catch {
      // non-JSON error body: keep the generic message
    }
    return submitFailed(loading, message, stage);
  }
  const statsLine = response.headers.get("X-Model-Stats");
  return submitSucceeded(loading, body, statsLine);
}
