import { ApiClient } from "./api.js";
import { createApp } from "./app.js";
import { API_BASE } from "./config.js";

createApp(document, new ApiClient((url, init) => fetch(url, init), API_BASE));
