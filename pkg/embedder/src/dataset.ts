/**
 * Dataset readers for the two formats the router ingests: JSONL records
 * with `id`/`text` fields, or CSV with `id,text[,label]` columns.
 */

import { readFileSync } from "node:fs";
import { extname } from "node:path";

import Papa from "papaparse";

export interface DatasetRow {
  id: string;
  text: string;
}

function validated(rows: Array<Record<string, unknown>>, path: string): DatasetRow[] {
  const seen = new Set<string>();
  const out: DatasetRow[] = [];
  rows.forEach((row, index) => {
    const id = row["id"];
    const text = row["text"];
    if (typeof id !== "string" || id === "") {
      throw new Error(`${path}: row ${index + 1} has no id`);
    }
    if (typeof text !== "string" || text === "") {
      throw new Error(`${path}: row ${index + 1} (${id}) has no text`);
    }
    if (seen.has(id)) {
      throw new Error(`${path}: duplicate id ${id}`);
    }
    seen.add(id);
    out.push({ id, text });
  });
  if (out.length === 0) {
    throw new Error(`${path}: dataset is empty`);
  }
  return out;
}

function rowsFromJsonl(content: string, path: string): Array<Record<string, unknown>> {
  return content
    .split("\n")
    .filter((line) => line.trim() !== "")
    .map((line, index) => {
      try {
        return JSON.parse(line) as Record<string, unknown>;
      } catch {
        throw new Error(`${path}: line ${index + 1} is not valid JSON`);
      }
    });
}

function rowsFromCsv(content: string, path: string): Array<Record<string, unknown>> {
  const parsed = Papa.parse<Record<string, unknown>>(content, {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new Error(`${path}: ${first.message} (row ${first.row})`);
  }
  return parsed.data;
}

/** Read and validate a dataset; format is chosen by file extension. */
export function readDataset(path: string): DatasetRow[] {
  const content = readFileSync(path, "utf8");
  const rows =
    extname(path).toLowerCase() === ".csv"
      ? rowsFromCsv(content, path)
      : rowsFromJsonl(content, path);
  return validated(rows, path);
}
