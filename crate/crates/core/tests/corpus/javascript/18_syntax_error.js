function broken( {
  const x = ;
  return x
}
