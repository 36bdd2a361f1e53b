// Zoomable, draggable hex map renderer. Draws exactly what the view
// payload carries: terrain/elevation/features on known tiles, black shade
// over unexplored ground, a dim veil on explored-but-fogged tiles, and
// unit/city markers only where the payload has them.

import { hexCorners, mapExtent, pointToTile, tileCenter, tileToColRow } from "./hex.js";
import { UNKNOWN, VIS_EXPLORED, VIS_UNEXPLORED, VIS_VISIBLE, ViewPayload } from "./protocol.js";

const TERRAIN_COLORS = [
  "#1b3a5c", // ocean
  "#2e5d8a", // coast
  "#4c9a43", // grassland
  "#a5a03b", // plains
  "#d8c06a", // desert
  "#b8c4c4", // tundra
  "#e8eef0", // snow
];
const UNKNOWN_COLOR = "#0a0a0d";
const PLAYER_COLORS = ["#e6c229", "#d94f30", "#7b52ab", "#2e9ab5",
  "#58b944", "#d767ae", "#888888", "#aaaaaa", "#999999", "#bbbbbb",
  "#777777", "#666666"];

export interface Camera {
  x: number;       // map-space coords of the canvas center
  y: number;
  scale: number;   // pixels per hex unit
}

export function defaultCamera(view: ViewPayload, canvasW: number, canvasH: number): Camera {
  const extent = mapExtent(view.width, view.height);
  const scale = Math.min(canvasW / extent.x, canvasH / extent.y);
  return { x: extent.x / 2, y: extent.y / 2, scale };
}

export function panCamera(cam: Camera, dxPixels: number, dyPixels: number): void {
  cam.x -= dxPixels / cam.scale;
  cam.y -= dyPixels / cam.scale;
}

export function zoomCamera(cam: Camera, factor: number, min = 4, max = 120): void {
  cam.scale = Math.min(max, Math.max(min, cam.scale * factor));
}

export function canvasToTile(cam: Camera, view: ViewPayload, px: number, py: number,
                             canvasW: number, canvasH: number): number {
  const mx = cam.x + (px - canvasW / 2) / cam.scale;
  const my = cam.y + (py - canvasH / 2) / cam.scale;
  return pointToTile(mx, my, view.width, view.height);
}

function ownerColor(owner: number): string {
  return PLAYER_COLORS[owner] ?? "#555555";
}

export function drawMap(ctx: CanvasRenderingContext2D, view: ViewPayload,
                        cam: Camera, canvasW: number, canvasH: number,
                        selectedTile: number = -1): void {
  ctx.fillStyle = "#05060a";
  ctx.fillRect(0, 0, canvasW, canvasH);
  const layers = view.layers;
  const vis = layers["visibility"];   // absent in omniscient views
  const terrain = layers["terrain"];
  const elevation = layers["elevation"];
  const feature = layers["feature"];
  const resource = layers["resource"];
  const owner = layers["owner"];
  const n = view.width * view.height;

  const toScreen = (mx: number, my: number) => ({
    x: (mx - cam.x) * cam.scale + canvasW / 2,
    y: (my - cam.y) * cam.scale + canvasH / 2,
  });

  for (let t = 0; t < n; t++) {
    const { col, row } = tileToColRow(t, view.width);
    const center = tileCenter(col, row);
    const screen = toScreen(center.x, center.y);
    if (screen.x < -2 * cam.scale || screen.x > canvasW + 2 * cam.scale ||
        screen.y < -2 * cam.scale || screen.y > canvasH + 2 * cam.scale) {
      continue;
    }
    const corners = hexCorners(center).map((c) => toScreen(c.x, c.y));
    ctx.beginPath();
    ctx.moveTo(corners[0].x, corners[0].y);
    for (let i = 1; i < 6; i++) ctx.lineTo(corners[i].x, corners[i].y);
    ctx.closePath();

    const tVis = vis ? vis[t] : VIS_VISIBLE;
    if (tVis === VIS_UNEXPLORED || terrain[t] === UNKNOWN) {
      ctx.fillStyle = UNKNOWN_COLOR;     // unknown areas shaded in black
      ctx.fill();
      continue;
    }
    ctx.fillStyle = TERRAIN_COLORS[terrain[t]] ?? "#333333";
    ctx.fill();
    if (elevation[t] === 2) {
      ctx.fillStyle = "rgba(60,50,45,0.75)";       // mountain
      ctx.fill();
    } else if (elevation[t] === 1) {
      ctx.fillStyle = "rgba(90,75,50,0.35)";       // hill
      ctx.fill();
    }
    if (feature[t] !== UNKNOWN && feature[t] >= 0) {
      ctx.fillStyle = ["rgba(20,80,25,0.45)", "rgba(25,110,30,0.5)",
        "rgba(60,90,60,0.45)", "rgba(120,200,230,0.5)",
        "rgba(160,190,90,0.4)"][feature[t]] ?? "rgba(0,0,0,0)";
      ctx.fill();
    }
    if (owner && owner[t] !== UNKNOWN && owner[t] >= 0) {
      ctx.strokeStyle = ownerColor(owner[t]);
      ctx.lineWidth = Math.max(1, cam.scale * 0.08);
      ctx.stroke();
    }
    if (resource[t] !== UNKNOWN && resource[t] >= 0 && cam.scale > 8) {
      ctx.fillStyle = "#ffe9a0";
      ctx.beginPath();
      ctx.arc(screen.x, screen.y + 0.45 * cam.scale, 0.14 * cam.scale, 0, 2 * Math.PI);
      ctx.fill();
    }
    if (tVis === VIS_EXPLORED) {
      ctx.fillStyle = "rgba(5,6,10,0.55)";         // fog veil
      ctx.fill();
    }
  }

  drawEntities(ctx, view, cam, canvasW, canvasH);

  if (selectedTile >= 0) {
    const { col, row } = tileToColRow(selectedTile, view.width);
    const corners = hexCorners(tileCenter(col, row)).map((c) => toScreen(c.x, c.y));
    ctx.beginPath();
    ctx.moveTo(corners[0].x, corners[0].y);
    for (let i = 1; i < 6; i++) ctx.lineTo(corners[i].x, corners[i].y);
    ctx.closePath();
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = Math.max(1.5, cam.scale * 0.12);
    ctx.stroke();
  }
}

function drawEntities(ctx: CanvasRenderingContext2D, view: ViewPayload, cam: Camera,
                      canvasW: number, canvasH: number): void {
  const toScreen = (mx: number, my: number) => ({
    x: (mx - cam.x) * cam.scale + canvasW / 2,
    y: (my - cam.y) * cam.scale + canvasH / 2,
  });
  const layers = view.layers;
  const n = view.width * view.height;
  const cityOwner = layers["city_owner"];
  const cityPop = layers["city_population"];
  const milOwner = layers["unit_military_owner"];
  const civOwner = layers["unit_civilian_owner"];
  for (let t = 0; t < n; t++) {
    const { col, row } = tileToColRow(t, view.width);
    const c = toScreen(tileCenter(col, row).x, tileCenter(col, row).y);
    if (cityOwner && cityOwner[t] !== UNKNOWN && cityOwner[t] >= 0) {
      ctx.fillStyle = ownerColor(cityOwner[t]);
      ctx.fillRect(c.x - 0.38 * cam.scale, c.y - 0.38 * cam.scale,
                   0.76 * cam.scale, 0.76 * cam.scale);
      if (cityPop && cityPop[t] > 0 && cam.scale > 10) {
        ctx.fillStyle = "#111111";
        ctx.font = `${Math.round(0.5 * cam.scale)}px sans-serif`;
        ctx.textAlign = "center";
        ctx.textBaseline = "middle";
        ctx.fillText(String(cityPop[t]), c.x, c.y);
      }
    }
    if (milOwner && milOwner[t] !== UNKNOWN && milOwner[t] >= 0) {
      ctx.fillStyle = ownerColor(milOwner[t]);
      ctx.beginPath();
      ctx.arc(c.x, c.y - 0.42 * cam.scale, 0.22 * cam.scale, 0, 2 * Math.PI);
      ctx.fill();
      ctx.strokeStyle = "#111111";
      ctx.lineWidth = 1;
      ctx.stroke();
    }
    if (civOwner && civOwner[t] !== UNKNOWN && civOwner[t] >= 0) {
      ctx.fillStyle = ownerColor(civOwner[t]);
      ctx.beginPath();
      ctx.moveTo(c.x, c.y + 0.2 * cam.scale);
      ctx.lineTo(c.x - 0.22 * cam.scale, c.y + 0.62 * cam.scale);
      ctx.lineTo(c.x + 0.22 * cam.scale, c.y + 0.62 * cam.scale);
      ctx.closePath();
      ctx.fill();
      ctx.strokeStyle = "#111111";
      ctx.lineWidth = 1;
      ctx.stroke();
    }
  }
}
