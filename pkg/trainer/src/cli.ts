#!/usr/bin/env node
import fs from "node:fs";
import type { AddressInfo } from "node:net";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { evaluateModel } from "./evaluate.js";
import { fit, loadSpec } from "./train.js";
import { serve } from "./server.js";

function die(err: unknown): never {
  console.error(err instanceof Error ? err.message : String(err));
  process.exit(1);
}

await yargs(hideBin(process.argv))
  .scriptName("trainer")
  .command(
    "fit",
    "fine-tune a classifier on a mixed training file",
    (y) =>
      y.option("spec", {
        type: "string",
        demandOption: true,
        describe: "path to a TrainSpec JSON document",
      }),
    (argv) => {
      try {
        const spec = loadSpec(argv.spec);
        const result = fit(spec);
        const last = result.epochLosses[result.epochLosses.length - 1];
        console.log(
          `trained on ${result.examples} examples for ${spec.epochs} epochs: ` +
            `loss ${result.initialLoss.toFixed(6)} -> ${last.toFixed(6)}`,
        );
        console.log(`model written to ${result.modelDir}`);
      } catch (err) {
        die(err);
      }
    },
  )
  .command(
    "serve",
    "serve a trained model over the classifier HTTP contract",
    (y) =>
      y
        .option("model", { type: "string", demandOption: true, describe: "model directory" })
        .option("port", { type: "number", demandOption: true })
        .option("host", { type: "string", default: "127.0.0.1" }),
    async (argv) => {
      try {
        const server = await serve(argv.model, argv.port, argv.host);
        const addr = server.address() as AddressInfo;
        console.log(`listening on http://${argv.host}:${addr.port}`);
      } catch (err) {
        die(err);
      }
    },
  )
  .command(
    "eval",
    "score one or more test files and report confusion matrices",
    (y) =>
      y
        .option("model", { type: "string", demandOption: true, describe: "model directory" })
        .option("tests", { type: "string", array: true, demandOption: true })
        .option("out", { type: "string", describe: "write the JSON report here instead of stdout" }),
    (argv) => {
      try {
        const report = evaluateModel(argv.model, argv.tests);
        const text = JSON.stringify(report, null, 2);
        if (argv.out) {
          fs.writeFileSync(argv.out, text + "\n");
        } else {
          console.log(text);
        }
      } catch (err) {
        die(err);
      }
    },
  )
  .demandCommand(1, "specify a command: fit, serve, or eval")
  .strict()
  .parseAsync()
  .catch(die);
