// Page controller and DOM wiring. The markup is built here from a static
// template; index.html only carries the empty #app mount point and styles.
// At most one check runs at a time and the result area always reflects the
// most recently submitted input: submitting hides the old result first.

import type { Verdict, VerdictField } from "./api.js";
import { ApiClient, ApiError, BadResponse, NetworkError, VERDICT_FIELDS } from "./api.js";
import { CheckHistory } from "./history.js";
import { classifyText } from "./validate.js";
import { verdictView } from "./view.js";

const TEMPLATE = `
  <form id="check-form">
    <label for="check-text">Infohash or magnet link</label>
    <input id="check-text" type="text" autocomplete="off" spellcheck="false"
           placeholder="40-hex infohash or magnet:?xt=urn:btih:...">
    <button id="check-submit" type="submit">Check</button>
    <label class="file-label" for="check-file">or pick a .torrent file</label>
    <input id="check-file" type="file" accept=".torrent">
  </form>
  <div id="check-status" role="alert" hidden></div>
  <section id="verdict" hidden>
    <div id="verdict-panel">
      <strong id="verdict-headline"></strong>
      <dl id="verdict-fields"></dl>
    </div>
  </section>
  <section id="history-section" hidden>
    <h2>Checked this session</h2>
    <ol id="history"></ol>
  </section>
`;

interface PageElements {
  form: HTMLFormElement;
  text: HTMLInputElement;
  file: HTMLInputElement;
  submit: HTMLButtonElement;
  status: HTMLElement;
  verdict: HTMLElement;
  panel: HTMLElement;
  headline: HTMLElement;
  fields: Record<VerdictField, HTMLElement>;
  historySection: HTMLElement;
  historyList: HTMLElement;
}

export class AppController {
  private busy = false;
  private lastAttempt: (() => Promise<void>) | null = null;

  constructor(
    private readonly doc: Document,
    private readonly client: ApiClient,
    private readonly els: PageElements,
    private readonly history: CheckHistory,
  ) {}

  isBusy(): boolean {
    return this.busy;
  }

  async submitText(raw: string): Promise<void> {
    const route = classifyText(raw);
    if (route.kind === "invalid") {
      this.showStatus(route.reason);
      return;
    }
    const label = raw.trim().length > 64 ? raw.trim().slice(0, 61) + "..." : raw.trim();
    if (route.kind === "hex") {
      await this.run(label, () => this.client.verdictByHex(route.hex));
    } else {
      await this.run(label, () => this.client.check(route.magnet));
    }
  }

  async submitFile(name: string, bytes: ArrayBuffer): Promise<void> {
    if (bytes.byteLength === 0) {
      this.showStatus(`${name} is empty`);
      return;
    }
    await this.run(name, () => this.client.check(bytes));
  }

  async retry(): Promise<void> {
    const attempt = this.lastAttempt;
    if (attempt) {
      await attempt();
    }
  }

  private async run(label: string, exec: () => Promise<Verdict>): Promise<void> {
    if (this.busy) {
      return;
    }
    const attempt = async () => {
      this.setBusy(true);
      this.els.verdict.hidden = true;
      this.showStatus("checking ...", { busy: true });
      try {
        const verdict = await exec();
        this.clearStatus();
        this.renderVerdict(verdict);
        this.history.push({ label, classification: verdict.classification });
        this.renderHistory();
      } catch (error) {
        this.renderError(error);
      } finally {
        this.setBusy(false);
      }
    };
    this.lastAttempt = attempt;
    await attempt();
  }

  private renderError(error: unknown): void {
    if (error instanceof NetworkError) {
      this.showStatus("the verdict service is unreachable", { retry: true });
    } else if (error instanceof ApiError) {
      this.showStatus(`check failed (${error.status}): ${error.detail}`);
    } else if (error instanceof BadResponse) {
      this.showStatus(`the service answered with something this page cannot display: ${error.message}`);
    } else {
      throw error;
    }
  }

  private renderVerdict(verdict: Verdict): void {
    const view = verdictView(verdict);
    this.els.panel.className = view.tone === "fake" ? "verdict-fake" : "verdict-clear";
    this.els.headline.textContent = view.headline;
    for (const row of view.fields) {
      const cell = this.els.fields[row.field];
      cell.textContent = row.value;
      if (row.isNull) {
        cell.setAttribute("data-null", "true");
      } else {
        cell.removeAttribute("data-null");
      }
    }
    this.els.verdict.hidden = false;
  }

  private renderHistory(): void {
    const list = this.els.historyList;
    list.textContent = "";
    for (const entry of this.history.entries()) {
      const item = this.doc.createElement("li");
      const what = this.doc.createElement("code");
      what.textContent = entry.label;
      const outcome = this.doc.createElement("span");
      outcome.textContent = entry.classification;
      outcome.className = entry.classification === "unknown" ? "hist-clear" : "hist-fake";
      item.append(what, " ", outcome);
      list.appendChild(item);
    }
    this.els.historySection.hidden = this.history.entries().length === 0;
  }

  private showStatus(message: string, opts: { retry?: boolean; busy?: boolean } = {}): void {
    const status = this.els.status;
    status.textContent = message;
    status.className = opts.busy ? "status-busy" : "status-problem";
    if (opts.retry) {
      const button = this.doc.createElement("button");
      button.id = "check-retry";
      button.type = "button";
      button.textContent = "Retry";
      button.addEventListener("click", () => {
        void this.retry();
      });
      status.append(" ", button);
    }
    status.hidden = false;
  }

  private clearStatus(): void {
    this.els.status.hidden = true;
    this.els.status.textContent = "";
  }

  private setBusy(busy: boolean): void {
    this.busy = busy;
    this.els.submit.disabled = busy;
    this.els.file.disabled = busy;
  }
}

function grab<T extends HTMLElement>(doc: Document, id: string): T {
  const el = doc.getElementById(id);
  if (!el) {
    throw new Error(`page is missing #${id}`);
  }
  return el as T;
}

export function createApp(
  doc: Document,
  client: ApiClient,
  historyLimit = 10,
): AppController {
  const root = grab(doc, "app");
  root.innerHTML = TEMPLATE;

  const fieldList = grab(doc, "verdict-fields");
  const fields = {} as Record<VerdictField, HTMLElement>;
  for (const field of VERDICT_FIELDS) {
    const term = doc.createElement("dt");
    term.textContent = field.replace(/_/g, " ");
    const cell = doc.createElement("dd");
    cell.setAttribute("data-field", field);
    fieldList.append(term, cell);
    fields[field] = cell;
  }

  const els: PageElements = {
    form: grab(doc, "check-form"),
    text: grab(doc, "check-text"),
    file: grab(doc, "check-file"),
    submit: grab(doc, "check-submit"),
    status: grab(doc, "check-status"),
    verdict: grab(doc, "verdict"),
    panel: grab(doc, "verdict-panel"),
    headline: grab(doc, "verdict-headline"),
    fields,
    historySection: grab(doc, "history-section"),
    historyList: grab(doc, "history"),
  };

  const controller = new AppController(doc, client, els, new CheckHistory(historyLimit));

  els.form.addEventListener("submit", (event) => {
    event.preventDefault();
    void controller.submitText(els.text.value);
  });
  els.file.addEventListener("change", () => {
    const file = els.file.files && els.file.files[0];
    if (!file) {
      return;
    }
    void file.arrayBuffer().then((bytes) => {
      els.file.value = "";
      return controller.submitFile(file.name, bytes);
    });
  });

  return controller;
}
