import { describe, expect, it } from "vitest";
import { readFileSync } from "fs";
import { CsvFormatError, numberColumn, parseReportCsv } from "../src/csv.js";

const LEVELS_PATH = new URL("../testdata/levels.csv", import.meta.url).pathname;

describe("report CSV parsing", () => {
  it("reads metadata, header and rows from a real report", () => {
    const report = parseReportCsv(readFileSync(LEVELS_PATH, "utf8"));
    expect(report.meta["kind"]).toBe("strong_error");
    expect(report.meta["schema"]).toBe("1");
    expect(report.header).toContain("mse");
    expect(report.rows.length).toBe(4);
    const dt = numberColumn(report, "dt");
    expect(Math.max(...dt)).toBeCloseTo(0.03125, 12);
  });

  it("rejects a schema version mismatch", () => {
    const text = "# schema=2\n# kind=strong_error\ndt,mse\n0.1,0.2\n";
    expect(() => parseReportCsv(text)).toThrow(CsvFormatError);
  });

  it("rejects an empty file", () => {
    expect(() => parseReportCsv("")).toThrow(CsvFormatError);
    expect(() => parseReportCsv("# schema=1\n")).toThrow(/no header/);
  });

  it("rejects missing or non-numeric columns", () => {
    const report = parseReportCsv(
      "# schema=1\n# kind=strong_error\ndt,mse\n0.1,oops\n",
    );
    expect(() => numberColumn(report, "ci_halfwidth")).toThrow(/missing/);
    expect(() => numberColumn(report, "mse")).toThrow(/finite/);
  });
});
