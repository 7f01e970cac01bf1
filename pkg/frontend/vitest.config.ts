import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globalSetup: ["./tests/setup/global.ts"],
    testTimeout: 30_000,
    hookTimeout: 90_000,
  },
});
