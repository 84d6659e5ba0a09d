/**
 * Reader for the experiment CSVs written by the stiffsde CLI.
 *
 * Files start with `# key=value` comment lines (schema version first),
 * then a header row and plain comma-separated data rows.  The reader
 * validates the schema version and the report kind so a figure can never
 * be silently rendered from the wrong file.
 */

import { readFileSync } from "fs";

export const EXPECTED_SCHEMA = "1";

export interface ReportCsv {
  meta: Record<string, string>;
  header: string[];
  rows: string[][];
}

export class CsvFormatError extends Error {}

export function parseReportCsv(text: string, path = "<csv>"): ReportCsv {
  const meta: Record<string, string> = {};
  const dataLines: string[] = [];
  for (const raw of text.split("\n")) {
    const line = raw.trimEnd();
    if (line.length === 0) continue;
    if (line.startsWith("#")) {
      const body = line.slice(1).trim();
      const eq = body.indexOf("=");
      if (eq > 0) meta[body.slice(0, eq).trim()] = body.slice(eq + 1).trim();
    } else {
      dataLines.push(line);
    }
  }
  if (meta["schema"] !== EXPECTED_SCHEMA) {
    throw new CsvFormatError(
      `${path}: schema ${JSON.stringify(meta["schema"])} does not match expected ${EXPECTED_SCHEMA}`,
    );
  }
  if (dataLines.length === 0) {
    throw new CsvFormatError(`${path}: no header row`);
  }
  const header = dataLines[0].split(",");
  const rows = dataLines.slice(1).map((l) => l.split(","));
  return { meta, header, rows };
}

export function readReportCsv(path: string, expectedKind: string): ReportCsv {
  const report = parseReportCsv(readFileSync(path, "utf8"), path);
  if (report.meta["kind"] !== expectedKind) {
    throw new CsvFormatError(
      `${path}: kind ${JSON.stringify(report.meta["kind"])} is not ${JSON.stringify(expectedKind)}`,
    );
  }
  return report;
}

/** Pull one column as numbers, by header name. */
export function numberColumn(report: ReportCsv, name: string): number[] {
  const idx = report.header.indexOf(name);
  if (idx < 0) {
    throw new CsvFormatError(`missing column ${JSON.stringify(name)}`);
  }
  return report.rows.map((row, i) => {
    const value = Number(row[idx]);
    if (!Number.isFinite(value)) {
      throw new CsvFormatError(`row ${i + 1}: ${name} is not a finite number`);
    }
    return value;
  });
}
