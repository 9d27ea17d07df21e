#!/usr/bin/env node
/**
 * conformance --host <h> --port <p>
 *
 * Runs the protocol conformance suite against a lanedrive bridge server.
 * The process exit code is the verdict: 0 on pass, 1 on any violation.
 */

import { conformanceRun, formatReport } from './conformance.js';

function parseArgs(argv: string[]): { host: string; port: number } {
  let host = '127.0.0.1';
  let port = 9090;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === '--host') {
      host = argv[++i];
    } else if (argv[i] === '--port') {
      port = Number(argv[++i]);
    } else if (argv[i] === 'conformance') {
      // optional subcommand word, accepted for readability
    } else {
      console.error(`unknown argument: ${argv[i]}`);
      console.error('usage: lanedrive-conformance [conformance] --host <h> --port <p>');
      process.exit(2);
    }
  }
  if (!Number.isInteger(port) || port < 1 || port > 65535) {
    console.error(`invalid port: ${port}`);
    process.exit(2);
  }
  return { host, port };
}

const { host, port } = parseArgs(process.argv.slice(2));
conformanceRun(host, port)
  .then((report) => {
    console.log(formatReport(report));
    process.exit(report.pass ? 0 : 1);
  })
  .catch((err) => {
    console.error(`conformance aborted: ${(err as Error).message}`);
    process.exit(1);
  });
