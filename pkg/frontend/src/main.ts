/** Console bootstrap: wires the store to the DOM and polls for state. */

import { GatewayClient } from "./api.js";
import { renderApp } from "./render.js";
import { ConsoleStore } from "./state.js";

const params = new URLSearchParams(window.location.search);
const baseUrl =
  params.get("gateway") ??
  localStorage.getItem("fabricsim.gateway") ??
  "http://127.0.0.1:8721";
localStorage.setItem("fabricsim.gateway", baseUrl);

const store = new ConsoleStore(new GatewayClient(baseUrl));
const app = document.getElementById("app")!;
const hostPicker = document.getElementById("host") as HTMLSelectElement;

store.subscribe((view) => {
  app.innerHTML = renderApp(view);
  if (view.topology && hostPicker.options.length === 0) {
    for (const host of view.topology.hosts) {
      const option = document.createElement("option");
      option.value = host.id;
      option.textContent = `${host.id} (${host.phys_addr_bits}-bit)`;
      hostPicker.appendChild(option);
    }
  }
  (document.getElementById("selection-count")!).textContent =
    `${view.selection.length} selected`;
});

app.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  const gpu = target.closest("[data-gpu]") as HTMLElement | null;
  if (gpu?.dataset.gpu) store.toggleSelect(gpu.dataset.gpu);
});

function onClick(id: string, handler: () => void): void {
  document.getElementById(id)!.addEventListener("click", handler);
}

function numberInput(id: string): number {
  return Number((document.getElementById(id) as HTMLInputElement).value);
}

onClick("refresh", () => void store.load());
onClick("compose", () => void store.composeSelection(hostPicker.value));
onClick("decompose", () => void store.decomposeSelection(hostPicker.value));
onClick("clear", () => store.clearSelection());
onClick("p2p", () => void store.whatIfP2p());
onClick("pool-check", () =>
  void store.whatIfPool(hostPicker.value, numberInput("required-bytes")),
);
onClick("fit", () => {
  const raw = (document.getElementById("fit-points") as HTMLInputElement)
    .value;
  try {
    void store.fitModel(JSON.parse(raw));
  } catch {
    alert("fit points must be JSON like [[8, 1145.0], [16, 603.5]]");
  }
});
onClick("predict", () => void store.whatIfPredict(numberInput("predict-n")));

void store.load();
setInterval(() => {
  if (!store.view.busy) void store.refreshState();
}, 5000);
