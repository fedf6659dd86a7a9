import { mountApp } from "./app.js";

mountApp(document.querySelector<HTMLElement>("#app")!);
