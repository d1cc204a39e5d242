/**
 * Application wiring: fetch API payloads, keep the ViewState in sync
 * with the controls, and re-render on every change. All reduction is
 * server-side; this file only decides which /api/view query to send.
 */

import { fetchLocalization, fetchView } from "./api.js";
import { drawnEventNumbers, renderError, renderFromRaw } from "./render.js";
import { defaultViewState, type ViewMode, type ViewState } from "./viewState.js";

function rankCheckboxes(container: HTMLElement, count: number): void {
  container.replaceChildren();
  for (let rank = 0; rank < count; rank++) {
    const label = container.ownerDocument.createElement("label");
    const box = container.ownerDocument.createElement("input");
    box.type = "checkbox";
    box.value = String(rank);
    box.className = "rank-box";
    label.append(box, ` ${rank}`);
    container.append(label);
  }
}

async function boot(): Promise<void> {
  const host = document.getElementById("app") as HTMLElement;
  const modeSelect = document.getElementById("mode") as HTMLSelectElement;
  const ranksBox = document.getElementById("ranks") as HTMLElement;
  const relatedBox = document.getElementById("related") as HTMLInputElement;
  const hint = document.getElementById("hint") as HTMLElement;

  const state: ViewState = defaultViewState();
  let rawReport: unknown;
  try {
    rawReport = await fetchLocalization();
  } catch (err) {
    renderError(host, String(err));
    return;
  }

  const refresh = async (): Promise<void> => {
    hint.textContent = "";
    if (state.mode === "custom" && state.selected_ranks.size === 0) {
      hint.textContent = "select at least one rank";
      return;
    }
    let rawView: unknown;
    try {
      rawView = await fetchView(state);
    } catch (err) {
      renderError(host, String(err));
      return;
    }
    const doc = renderFromRaw(host, rawView, rawReport, {
      onSelect: (no) => {
        state.selected_event = no;
      },
    });
    if (doc && state.selected_event !== null) {
      if (!drawnEventNumbers(host).includes(state.selected_event)) {
        state.selected_event = null;
      }
    }
    if (doc) {
      rankCheckboxes(ranksBox, doc.header.process_count);
      for (const box of ranksBox.querySelectorAll<HTMLInputElement>(".rank-box")) {
        box.checked = state.selected_ranks.has(Number(box.value));
        box.addEventListener("change", () => {
          const rank = Number(box.value);
          if (box.checked) {
            state.selected_ranks.add(rank);
          } else {
            state.selected_ranks.delete(rank);
          }
          if (state.mode === "custom") {
            void refresh();
          }
        });
      }
    }
  };

  modeSelect.addEventListener("change", () => {
    state.mode = modeSelect.value as ViewMode;
    void refresh();
  });
  relatedBox.addEventListener("change", () => {
    state.include_related = relatedBox.checked;
    if (state.mode === "custom") {
      void refresh();
    }
  });

  await refresh();
}

void boot();
