// Session-local record of recent checks, newest first, capped.

import type { Classification } from "./api.js";

export interface HistoryEntry {
  label: string;
  classification: Classification;
}

export class CheckHistory {
  private items: HistoryEntry[] = [];

  constructor(private readonly limit: number = 10) {
    if (limit < 1) {
      throw new RangeError("history limit must be at least 1");
    }
  }

  push(entry: HistoryEntry): void {
    this.items.unshift(entry);
    if (this.items.length > this.limit) {
      this.items.length = this.limit;
    }
  }

  entries(): readonly HistoryEntry[] {
    return this.items;
  }
}
