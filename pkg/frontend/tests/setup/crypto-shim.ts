/**
 * jsdom's SubtleCrypto enforces same-realm buffer brands, which fails
 * for typed arrays constructed by test modules. Node's implementation
 * checks shapes instead of brands, so substitute it wholesale.
 */

import { webcrypto } from "node:crypto";

Object.defineProperty(globalThis, "crypto", { value: webcrypto, configurable: true });
