async function* stream(source) {
  for await (const chunk of source) {
    yield chunk;
  }
}
