/**
 * Block color rule shared bit-exactly with the server: the first three
 * bytes of the block hash are the RGB channels.
 */
export function colorOf(hashHex: string): string {
  if (!/^[0-9a-f]{6}/.test(hashHex)) {
    throw new Error(`not a hash hex string: ${hashHex.slice(0, 12)}`);
  }
  return "#" + hashHex.slice(0, 6);
}

/** Black or white, whichever reads against the tile color. */
export function textColorFor(hashHex: string): string {
  const r = parseInt(hashHex.slice(0, 2), 16);
  const g = parseInt(hashHex.slice(2, 4), 16);
  const b = parseInt(hashHex.slice(4, 6), 16);
  const luma = 0.299 * r + 0.587 * g + 0.114 * b;
  return luma > 128 ? "#000000" : "#ffffff";
}
