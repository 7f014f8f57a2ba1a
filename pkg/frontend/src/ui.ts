/**
 * DOM wiring for the desk console.  All state lives in the Session; this
 * module only renders snapshots and forwards user input.
 */

import { PolicyClient } from "./api.js";
import { drawChart } from "./charts.js";
import { mulberry32, Session, SessionSnapshot, WhatIfBranch } from "./session.js";

const fmtShares = (v: number) => v.toLocaleString("en-US", { maximumFractionDigits: 0 });
const fmtEur = (v: number) =>
  v.toLocaleString("en-US", { maximumFractionDigits: 0 }) + " EUR";
const fmtPx = (v: number) => v.toFixed(4);

export function mountConsole(root: HTMLElement, serviceBase: string): void {
  root.innerHTML = `
    <div id="banner" class="banner" hidden></div>
    <section class="panel" id="status-panel">
      <h2>Program</h2>
      <div id="status-grid" class="grid"></div>
    </section>
    <section class="panel">
      <h2>Today's recommendation</h2>
      <div id="reco"></div>
      <div class="controls">
        <label>Realised close <input id="price-input" type="number" step="0.01"></label>
        <button id="commit-btn">Commit day</button>
        <button id="sample-btn" title="draw the close from the model law">Draw a day</button>
        <button id="export-btn">Export CSV</button>
      </div>
    </section>
    <section class="panel">
      <h2>What if</h2>
      <div class="controls">
        <label>Orders (shares, comma separated) <input id="whatif-orders" value="0"></label>
        <label>Innovations <input id="whatif-eps" value="-2,0,2"></label>
        <button id="whatif-btn">Preview</button>
        <button id="whatif-close-btn">Close</button>
      </div>
      <table id="whatif-table" hidden>
        <thead><tr><th>order</th><th>eps</th><th>S'</th><th>A'</th><th>q'</th>
        <th>value at next state</th></tr></thead>
        <tbody></tbody>
      </table>
    </section>
    <section class="panel charts">
      <div><h2>Inventory vs share target</h2>
      <canvas id="chart-q" width="460" height="240"></canvas></div>
      <div><h2>Price vs running average</h2>
      <canvas id="chart-s" width="460" height="240"></canvas></div>
    </section>
  `;

  const session = new Session(new PolicyClient(serviceBase));
  const draw = mulberry32(20240807);

  const banner = root.querySelector("#banner") as HTMLElement;
  const statusGrid = root.querySelector("#status-grid") as HTMLElement;
  const reco = root.querySelector("#reco") as HTMLElement;
  const priceInput = root.querySelector("#price-input") as HTMLInputElement;
  const whatifTable = root.querySelector("#whatif-table") as HTMLTableElement;

  function render(snap: SessionSnapshot): void {
    banner.hidden = !snap.banner;
    banner.textContent = snap.banner ?? "";
    const meta = snap.status === "connecting" ? null : session.serviceMeta();
    const target = meta ? meta.contract.F / ((1 - meta.contract.beta) * snap.state.A) : 0;
    statusGrid.innerHTML = `
      <div>day <b>${snap.day}</b>${meta ? ` / ${meta.contract.N}` : ""}</div>
      <div>price <b>${fmtPx(snap.state.S)}</b></div>
      <div>average <b>${fmtPx(snap.state.A)}</b></div>
      <div>bought <b>${fmtShares(snap.state.q)}</b></div>
      <div>share target <b>${fmtShares(target)}</b></div>
      <div>cash spent <b>${fmtEur(snap.state.X)}</b></div>
      <div>status <b>${snap.status}</b>${snap.extrapolated ? " (off-grid warning)" : ""}</div>
    `;
    if (snap.settlement) {
      reco.innerHTML = `<p class="settled">Settled on day ${snap.settlement.day}: deliver
        <b>${fmtShares(snap.settlement.sharesDelivered)}</b> shares at average
        ${fmtPx(snap.settlement.averagePrice)}; residual execution premium
        ${fmtEur(snap.settlement.settlementPremium)}.</p>`;
    } else if (snap.recommendation) {
      const r = snap.recommendation;
      reco.innerHTML = `
        <p>${r.exercise ? "<b>Settle now.</b>" : `Trade <b>${fmtShares(r.order)}</b> shares today.`}</p>
        <div class="grid small">
          <div>value ${fmtEur(r.theta)}</div>
          <div>settle-now ${fmtEur(r.intrinsic)}</div>
          <div>continue ${r.continuation === null ? "-" : fmtEur(r.continuation)}</div>
        </div>`;
    } else {
      reco.textContent = "waiting for the service...";
    }
    priceInput.placeholder = fmtPx(snap.state.S);

    const qChart = root.querySelector("#chart-q") as HTMLCanvasElement;
    const sChart = root.querySelector("#chart-s") as HTMLCanvasElement;
    const rows = [...snap.history, {
      day: snap.day, S: snap.state.S, A: snap.state.A, q: snap.state.q,
      order: 0, X: snap.state.X, exercised: false,
    }];
    drawChart(qChart, [
      { label: "bought", color: "#1668b0", points: rows.map((r) => ({ x: r.day, y: r.q })) },
      {
        label: "target F/A", color: "#c44e2e",
        points: meta ? rows.map((r) => ({
          x: r.day, y: meta.contract.F / ((1 - meta.contract.beta) * r.A),
        })) : [],
      },
    ]);
    drawChart(sChart, [
      { label: "price", color: "#1668b0", points: rows.map((r) => ({ x: r.day, y: r.S })) },
      { label: "average", color: "#3d8f3d", points: rows.map((r) => ({ x: r.day, y: r.A })) },
    ]);
  }

  function renderWhatIf(branches: WhatIfBranch[]): void {
    const body = whatifTable.querySelector("tbody") as HTMLElement;
    body.innerHTML = branches.map((b) => `
      <tr><td>${fmtShares(b.order)}</td><td>${b.eps.toFixed(2)}</td>
      <td>${fmtPx(b.next.S)}</td><td>${fmtPx(b.next.A)}</td>
      <td>${fmtShares(b.next.q)}</td>
      <td>${b.theta === null ? "-" : fmtEur(b.theta)}</td></tr>`).join("");
    whatifTable.hidden = false;
  }

  (root.querySelector("#commit-btn") as HTMLButtonElement).onclick = async () => {
    const value = parseFloat(priceInput.value);
    if (!Number.isFinite(value) || value <= 0) {
      banner.hidden = false;
      banner.textContent = "enter a positive close before committing";
      return;
    }
    render(await session.stepDay(value));
    priceInput.value = "";
  };
  (root.querySelector("#sample-btn") as HTMLButtonElement).onclick = async () => {
    render(await session.stepSampled(draw));
  };
  (root.querySelector("#export-btn") as HTMLButtonElement).onclick = () => {
    const blob = new Blob([session.exportCsv()], { type: "text/csv" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "session-trajectory.csv";
    a.click();
    URL.revokeObjectURL(a.href);
  };
  (root.querySelector("#whatif-btn") as HTMLButtonElement).onclick = async () => {
    const orders = (root.querySelector("#whatif-orders") as HTMLInputElement).value
      .split(",").map((s) => parseFloat(s.trim())).filter(Number.isFinite);
    const eps = (root.querySelector("#whatif-eps") as HTMLInputElement).value
      .split(",").map((s) => parseFloat(s.trim())).filter(Number.isFinite);
    renderWhatIf(await session.whatIf(orders, eps));
  };
  (root.querySelector("#whatif-close-btn") as HTMLButtonElement).onclick = () => {
    whatifTable.hidden = true;
  };

  void session.connect().then(render);
}
