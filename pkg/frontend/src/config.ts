// Generated by scripts/configure.mjs; API_BASE env var overrides at build time.
export const API_BASE: string = "";
