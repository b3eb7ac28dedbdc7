const wait = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

async function retry(fn, times) {
  let lastError;
  for (let i = 0; i < times; i++) {
    try {
      return await fn();
    } catch (err) {
      lastError = err;
      await wait(10);
    }
  }
  throw lastError;
}
