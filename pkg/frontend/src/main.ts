import { mountConsole } from "./ui.js";

const params = new URLSearchParams(window.location.search);
const service = params.get("service") ?? "http://127.0.0.1:8000";
const root = document.getElementById("console-root");
if (root) {
  mountConsole(root, service);
}
