#!/usr/bin/env node
import { realpathSync } from "fs";
import { pathToFileURL } from "url";

import yargs from "yargs";

import { DataError } from "./csv.js";
import { plotFigure } from "./plot.js";
import { FIGURE_KINDS, SpecError, type FigureKind, type PlotSpec } from "./spec.js";

export const EXIT_OK = 0;
export const EXIT_DATA = 1;
export const EXIT_USAGE = 2;

/** Parse argv (without the node/script prefix) and render; returns an exit code. */
export function runCli(argv: string[]): number {
  let spec: PlotSpec | undefined;
  try {
    yargs(argv.length === 0 ? ["--help"] : argv)
      .scriptName("plot")
      .usage("$0 <kind> --in CSV [--in CSV2] --out IMG [--title S]")
      .command(
        "$0 <kind>",
        "render one figure from aojc CSV output",
        (y) =>
          y
            .positional("kind", {
              describe: "figure kind",
              type: "string",
              choices: FIGURE_KINDS as unknown as string[],
              demandOption: true,
            })
            .option("in", {
              type: "string",
              array: true,
              demandOption: true,
              describe: "input CSV path (repeat for overlays)",
            })
            .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
            .option("title", { type: "string", describe: "figure title" })
            .option("width", { type: "number", describe: "image width in px" })
            .option("height", { type: "number", describe: "image height in px" }),
        (parsed) => {
          spec = {
            kind: parsed.kind as FigureKind,
            inputs: parsed.in as string[],
            output: parsed.out as string,
            title: parsed.title,
            width: parsed.width,
            height: parsed.height,
          };
        },
      )
      .strict()
      .exitProcess(false)
      .fail((msg, err) => {
        throw err ?? new SpecError(msg);
      })
      .parseSync();
    if (spec === undefined) return EXIT_OK; // --help / --version path
    const out = plotFigure(spec);
    console.log(`wrote ${out}`);
    return EXIT_OK;
  } catch (e) {
    if (e instanceof DataError) {
      console.error(`error: ${e.message}`);
      return EXIT_DATA;
    }
    console.error(`usage error: ${(e as Error).message}`);
    return EXIT_USAGE;
  }
}

function invokedDirectly(): boolean {
  const script = process.argv[1];
  if (!script) return false;
  try {
    return import.meta.url === pathToFileURL(realpathSync(script)).href;
  } catch {
    return false;
  }
}

if (invokedDirectly()) {
  process.exit(runCli(process.argv.slice(2)));
}
